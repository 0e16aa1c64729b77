"""Run an approach scenario and print the per-frame log.

    python scripts/run_approach.py [configs/approach_wall.yaml] [--out runs/approach] [--frames N]
"""

import argparse
import time
from dataclasses import replace

from freespace.config import load_config
from freespace.pipeline import report, run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="configs/approach_wall.yaml")
    ap.add_argument("--out", default="runs/approach")
    ap.add_argument("--frames", type=int)
    ap.add_argument("--emit-images", default="decision", choices=["none", "decision", "all"])
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.frames:
        cfg.trajectory = replace(cfg.trajectory, frame_count=args.frames)
    t0 = time.perf_counter()
    logs = run_scenario(cfg, emit_images=args.emit_images, out_dir=args.out)
    elapsed = time.perf_counter() - t0

    print(f"{'frame':>5} {'truth':>7} {'stereo':>7} {'lidar':>7} {'fused':>7} {'blk%':>6}  verdict")
    for r in logs:
        lidar = f"{r.d_lidar:7.3f}" if r.d_lidar is not None else "      -"
        print(f"{r.frame:5d} {r.d_truth:7.3f} {r.d_stereo:7.3f} {lidar} {r.d_fused:7.3f} "
              f"{100 * r.blocked_fraction:6.1f}  {r.verdict}")
    s = report(logs)
    print(f"\n{len(logs)} frames in {elapsed:.1f} s ({elapsed / len(logs):.2f} s/frame)")
    print(f"MAE stereo {s.mae_stereo:.4f}  lidar {s.mae_lidar:.4f}  fused {s.mae_fused:.4f} m")
    print(f"transitions at frames {s.transitions}; artifacts in {args.out}")


if __name__ == "__main__":
    main()
