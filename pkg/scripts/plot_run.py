"""Plot the distance channels and verdicts of a finished run (needs matplotlib).

    python scripts/plot_run.py runs/approach [--save runs/approach/distances.png]
"""

import argparse
from pathlib import Path

from freespace.pipeline import read_log


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run_dir")
    ap.add_argument("--save")
    args = ap.parse_args()

    import matplotlib

    if args.save:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    logs = read_log(Path(args.run_dir) / "frames.csv")
    t = [r.t for r in logs]
    fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6), gridspec_kw={"height_ratios": [3, 1]})
    ax.plot(t, [r.d_truth for r in logs], "k--", label="truth")
    ax.plot(t, [r.d_stereo for r in logs], ".", label="stereo")
    ax.plot(t, [r.d_lidar if r.d_lidar is not None else float("nan") for r in logs], ".", label="lidar")
    ax.plot(t, [r.d_fused for r in logs], "-", label="fused")
    ax.set_ylabel("distance [m]")
    ax.legend()
    ax2.step(t, [r.verdict == "Blocked" for r in logs], where="post")
    ax2.set_yticks([0, 1], ["Free", "Blocked"])
    ax2.set_xlabel("t [s]")
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=120)
    else:
        plt.show()


if __name__ == "__main__":
    main()
