"""Scenario runner: per-frame sensing, fusion and window decision, with CSV logs."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import imageio
from .config import ScenarioConfig, dump_config
from .errors import ContractViolation, FrameError, FreespaceError
from .fusion import DistanceFilter, Measurement, sample_variance
from .measure import StereoMeasurement, measure_stereo
from .scene import lidar_sample, optical_axis_distance
from .window import annotate, classify_window

log = logging.getLogger(__name__)

LOG_COLUMNS = ["frame", "t", "d_truth", "d_stereo", "d_lidar", "d_fused", "p00", "blocked_fraction", "verdict"]
EMIT_MODES = ("none", "decision", "all")


@dataclass(frozen=True)
class FrameLog:
    frame: int
    t: float
    d_truth: float
    d_stereo: float
    d_lidar: Optional[float]
    d_fused: float
    p00: float
    blocked_fraction: float
    verdict: str


def frame_seeds(seed: int, count: int):
    """Independent (image, depth, lidar) generators per frame."""
    for ss in np.random.SeedSequence(seed).spawn(count):
        yield tuple(np.random.default_rng(s) for s in ss.spawn(3))


def _emit(out: Path, i: int, meas: StereoMeasurement, decision, mode: str):
    frames = out / "frames"
    frames.mkdir(parents=True, exist_ok=True)
    stem = frames / f"frame_{i:04d}"
    imageio.write_pgm(f"{stem}_decision.pgm", annotate(meas.frame.left, meas.rect, decision))
    if mode != "all":
        return
    imageio.write_pgm(f"{stem}_left.pgm", meas.frame.left)
    imageio.write_pgm(f"{stem}_right.pgm", meas.frame.right)
    save_disparity(f"{stem}_disparity.pfm", meas.raw)
    imageio.write_pfm(f"{stem}_smoothed.pfm", meas.smoothed.values)
    imageio.write_pfm(f"{stem}_depth.pfm", meas.depth.values)
    imageio.write_pfm(f"{stem}_truth_depth.pfm", meas.frame.depth)


def save_disparity(path, dmap) -> None:
    """PFM values plus a sidecar ``<name>.mask.pgm`` (255 valid, 0 invalid)."""
    path = Path(path)
    imageio.write_pfm(path, dmap.values)
    imageio.write_pgm(path.with_suffix(".mask.pgm"), np.where(dmap.valid, 255, 0).astype(np.uint8))


def run_scenario(cfg: ScenarioConfig, emit_images: str = "decision", out_dir=None, write: bool = True) -> List[FrameLog]:
    """Run every frame of the approach; writes ``frames.csv``, ``summary.json``
    and the resolved ``config.yaml`` under the output directory."""
    if emit_images not in EMIT_MODES:
        raise ContractViolation(f"emit_images must be one of {EMIT_MODES}")
    cfg.validate()
    traj = cfg.trajectory
    fusion_cfg = replace(cfg.fusion, dt=1.0 / traj.frame_rate_hz)
    kf = DistanceFilter(fusion_cfg)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)

    logs = []
    for i, (rng_img, rng_depth, rng_lidar) in enumerate(frame_seeds(cfg.seed, traj.frame_count)):
        t = i / traj.frame_rate_hz
        pose = traj.pose(i)
        try:
            meas = measure_stereo(
                cfg.scene, cfg.rig, pose, cfg.match, cfg.wls, cfg.window,
                image_noise_std=cfg.noise.image_noise_std,
                depth_noise_variance=cfg.noise.stereo_depth_noise_variance,
                rng=rng_img, depth_rng=rng_depth,
            )
            d_lidar = lidar_sample(cfg.scene, cfg.rig, pose, cfg.lidar, rng_lidar)
            m = Measurement(meas.centroid_depth, d_lidar, t, lidar_valid=d_lidar is not None)
            d_fused = kf.step(m)
            decision = classify_window(meas.depth, meas.rect, d_fused, cfg.window, d_lidar)
        except FreespaceError as exc:
            raise FrameError(i, exc) from exc
        rec = FrameLog(
            frame=i,
            t=t,
            d_truth=optical_axis_distance(cfg.scene, pose),
            d_stereo=meas.centroid_depth,
            d_lidar=d_lidar,
            d_fused=d_fused,
            p00=float(kf.state.P[0, 0]),
            blocked_fraction=decision.blocked_pixel_fraction,
            verdict=decision.verdict.value,
        )
        logs.append(rec)
        log.debug("frame %d: %s", i, rec)
        if write and emit_images != "none":
            _emit(out, i, meas, decision, emit_images)

    if write:
        write_log(logs, out / "frames.csv")
        (out / "summary.json").write_text(json.dumps(json_safe(asdict(report(logs))), indent=2) + "\n")
        dump_config(cfg, out / "config.yaml")
    return logs


# ---------------------------------------------------------------------------
# CSV


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return f"{x:.6f}"


def write_log(logs: Sequence[FrameLog], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for r in logs:
                w.writerow([
                    r.frame, _fmt(r.t), _fmt(r.d_truth), _fmt(r.d_stereo), _fmt(r.d_lidar),
                    _fmt(r.d_fused), _fmt(r.p00), _fmt(r.blocked_fraction), r.verdict,
                ])
    except OSError as exc:
        raise OSError(f"cannot write log {path}: {exc}") from exc


def read_log(path) -> List[FrameLog]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LOG_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            out.append(FrameLog(
                frame=int(row[0]),
                t=float(row[1]),
                d_truth=float(row[2]),
                d_stereo=float(row[3]),
                d_lidar=float(row[4]) if row[4] else None,
                d_fused=float(row[5]),
                p00=float(row[6]),
                blocked_fraction=float(row[7]),
                verdict=row[8],
            ))
    return out


# ---------------------------------------------------------------------------
# Summary


def json_safe(obj):
    """NaN/inf become null so summary.json stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    return obj


@dataclass(frozen=True)
class Summary:
    frames: int
    mae_stereo: float
    mae_lidar: float
    mae_fused: float
    var_stereo: float
    var_lidar: float
    var_fused: float
    transitions: List[int]
    max_fused_error: float


def _mae(est, truth):
    pairs = [(e, t) for e, t in zip(est, truth) if e is not None and math.isfinite(t)]
    if not pairs:
        return math.nan
    return sum(abs(e - t) for e, t in pairs) / len(pairs)


def _var(values):
    vals = [v for v in values if v is not None]
    return sample_variance(vals) if len(vals) >= 2 else math.nan


def report(logs: Sequence[FrameLog]) -> Summary:
    if not logs:
        raise ContractViolation("report needs at least one frame record")
    truth = [r.d_truth for r in logs]
    fused_err = [abs(r.d_fused - r.d_truth) for r in logs if math.isfinite(r.d_truth)]
    transitions = [b.frame for a, b in zip(logs, logs[1:]) if a.verdict != b.verdict]
    return Summary(
        frames=len(logs),
        mae_stereo=_mae([r.d_stereo for r in logs], truth),
        mae_lidar=_mae([r.d_lidar for r in logs], truth),
        mae_fused=_mae([r.d_fused for r in logs], truth),
        var_stereo=_var([r.d_stereo for r in logs]),
        var_lidar=_var([r.d_lidar for r in logs]),
        var_fused=_var([r.d_fused for r in logs]),
        transitions=transitions,
        max_fused_error=max(fused_err) if fused_err else math.nan,
    )
