"""Command-line entry point.

    freespace render     --config C --out DIR
    freespace disparity  --config C --out DIR
    freespace pipeline   --config C --out DIR [--seed N] [--frames N] [--emit-images MODE]
    freespace calibrate  --config C --out DIR [--seed N] [--frames N]
    freespace report     --out DIR

Failures print a single ``error: <category>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import imageio
from .config import ScenarioConfig, load_config
from .errors import ConfigError, FrameError, FreespaceError
from .fusion import calibrate
from .measure import measure_stereo
from .pipeline import EMIT_MODES, json_safe, read_log, report, run_scenario, save_disparity
from .scene import render_stereo

EXIT_ERROR = 1
EXIT_IO = 3


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "frames", None) is not None:
        try:
            cfg.trajectory = replace(cfg.trajectory, frame_count=args.frames)
        except FreespaceError as exc:
            raise ConfigError(f"--frames: {exc}") from exc
    cfg.validate()
    return cfg


def _out(args, cfg=None) -> Path:
    out = Path(args.out if args.out else (cfg.output_dir if cfg else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_render(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    rng = np.random.default_rng(cfg.seed)
    frame = render_stereo(cfg.scene, cfg.rig, cfg.trajectory.pose(0), cfg.noise.image_noise_std, rng)
    imageio.write_pgm(out / "left.pgm", frame.left)
    imageio.write_pgm(out / "right.pgm", frame.right)
    imageio.write_pfm(out / "truth_depth.pfm", frame.depth)
    print(f"wrote {out}/left.pgm, right.pgm, truth_depth.pfm")
    return 0


def cmd_disparity(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    meas = measure_stereo(cfg.scene, cfg.rig, cfg.trajectory.pose(0), cfg.match, cfg.wls, cfg.window,
                          image_noise_std=cfg.noise.image_noise_std, rng=np.random.default_rng(cfg.seed))
    imageio.write_pgm(out / "left.pgm", meas.frame.left)
    imageio.write_pgm(out / "right.pgm", meas.frame.right)
    save_disparity(out / "disparity.pfm", meas.raw)
    imageio.write_pfm(out / "smoothed.pfm", meas.smoothed.values)
    imageio.write_pfm(out / "depth.pfm", meas.depth.values)
    print(f"valid fraction {meas.raw.valid.mean():.4f}  centroid depth {meas.centroid_depth:.4f} m")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    logs = run_scenario(cfg, emit_images=args.emit_images, out_dir=out)
    s = report(logs)
    print(f"{s.frames} frames  MAE fused {s.mae_fused:.4f} m  transitions {s.transitions}  -> {out}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    n = args.frames if args.frames is not None else 150
    var_s, var_l = calibrate(cfg.scene, cfg.rig, cfg.trajectory.pose(0), n=n, seed=cfg.seed,
                             lidar=cfg.lidar, match=cfg.match, wls=cfg.wls, window=cfg.window, noise=cfg.noise)
    result = {"samples": n, "stereo_variance": var_s, "lidar_variance": var_l}
    (out / "calibration.json").write_text(json.dumps(result, indent=2) + "\n")
    print(f"stereo variance {var_s:.10f}  lidar variance {var_l:.10f}  (n={n})")
    return 0


def cmd_report(args) -> int:
    path = Path(args.out or ".") / "frames.csv"
    try:
        logs = read_log(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps(json_safe(asdict(report(logs))), indent=2))
    return 0


COMMANDS = {
    "render": cmd_render,
    "disparity": cmd_disparity,
    "pipeline": cmd_pipeline,
    "calibrate": cmd_calibrate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freespace", description="Stereo + 1D-LiDAR free-window simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--out", metavar="DIR")
        if name == "report":
            continue
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--frames", type=int, metavar="N")
        if name == "pipeline":
            sp.add_argument("--emit-images", choices=EMIT_MODES, default="decision")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FrameError as exc:
        print(f"error: {getattr(exc.cause, 'category', 'error')}: frame {exc.frame}: {exc.cause}", file=sys.stderr)
        return EXIT_ERROR
    except FreespaceError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - keep the one-line contract
        logging.getLogger(__name__).debug("unhandled", exc_info=True)
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
