"""Scenario configuration: nested dataclasses loaded from YAML.

Unknown keys are rejected so a misspelled noise parameter cannot silently fall
back to its default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError, FreespaceError
from .fusion import FusionConfig
from .measure import SensorNoise
from .scene import Box, Checker, LidarModel, Plane, Pose, Scene, Sphere, StereoRig, ValueNoise
from .stereo import MatchParams
from .window import WindowSpec
from .wls import WlsParams

PRIMITIVES = {"sphere": Sphere, "box": Box, "plane": Plane}
TEXTURES = {"checker": Checker, "value_noise": ValueNoise}


@dataclass(frozen=True)
class Trajectory:
    """Straight approach along the camera's +z at constant speed."""

    start: Pose = field(default_factory=Pose)
    velocity_mps: float = 0.0
    frame_rate_hz: float = 10.0
    frame_count: int = 1

    def __post_init__(self):
        if not self.frame_rate_hz > 0:
            raise ConfigError("frame_rate_hz must be > 0")
        if self.frame_count < 1:
            raise ConfigError("frame_count must be >= 1")

    def pose(self, frame: int) -> Pose:
        return self.start.moved(self.velocity_mps * frame / self.frame_rate_hz)


def default_scene() -> Scene:
    """Value-noise wall 8 m ahead; non-periodic so stereo matching is unambiguous."""
    return Scene([Plane((0.0, 0.0, -1.0), -8.0, ValueNoise(scale=0.2, amplitude=90.0, octaves=3))])


@dataclass
class ScenarioConfig:
    scene: Scene = field(default_factory=default_scene)
    rig: StereoRig = field(default_factory=StereoRig)
    lidar: LidarModel = field(default_factory=LidarModel)
    match: MatchParams = field(default_factory=MatchParams)
    wls: WlsParams = field(default_factory=WlsParams)
    window: WindowSpec = field(default_factory=WindowSpec)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    noise: SensorNoise = field(default_factory=SensorNoise)
    trajectory: Trajectory = field(default_factory=lambda: Trajectory(velocity_mps=1.0, frame_count=60))
    seed: int = 0
    output_dir: str = "runs/default"

    def validate(self) -> None:
        try:
            self.match.validate(self.rig.width)
        except FreespaceError as exc:
            raise ConfigError(f"match: {exc}") from exc


# ---------------------------------------------------------------------------
# dict <-> dataclass


def _build(cls, data: Any, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: tuple(map(_tuplify, v)) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (FreespaceError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _tuplify(v):
    return tuple(map(_tuplify, v)) if isinstance(v, list) else v


def _tagged(table, data, where):
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError(f"{where}: needs a 'type' key (one of {', '.join(table)})")
    data = dict(data)
    kind = data.pop("type")
    if kind not in table:
        raise ConfigError(f"{where}: unknown type {kind!r}")
    return table[kind], data


def _primitive(data, where):
    cls, data = _tagged(PRIMITIVES, data, where)
    if "texture" in data:
        tcls, tdata = _tagged(TEXTURES, data["texture"], f"{where}.texture")
        data["texture"] = _build(tcls, tdata, f"{where}.texture")
    return _build(cls, data, where)


def _scene(data, where="scene"):
    data = dict(data or {})
    prims = data.pop("primitives", []) or []
    scene = _build(Scene, data, where)
    scene.primitives = [_primitive(p, f"{where}.primitives[{i}]") for i, p in enumerate(prims)]
    return scene


def _trajectory(data, where="trajectory"):
    data = dict(data or {})
    if "start" in data:
        data["start"] = _build(Pose, data["start"], f"{where}.start")
    return _build(Trajectory, data, where)


SECTIONS = {
    "rig": StereoRig,
    "lidar": LidarModel,
    "match": MatchParams,
    "wls": WlsParams,
    "window": WindowSpec,
    "fusion": FusionConfig,
    "noise": SensorNoise,
}


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = set(SECTIONS) | {"scene", "trajectory", "seed", "output_dir"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    kwargs = {name: _build(cls, data[name], name) for name, cls in SECTIONS.items() if name in data}
    if "scene" in data:
        kwargs["scene"] = _scene(data["scene"])
    if "trajectory" in data:
        kwargs["trajectory"] = _trajectory(data["trajectory"])
    for key in ("seed", "output_dir"):
        if key in data:
            kwargs[key] = data[key]
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from exc
    return config_from_dict(data)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        out = {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for table in (PRIMITIVES, TEXTURES):
            for tag, cls in table.items():
                if type(obj) is cls:
                    out = {"type": tag, **out}
        return out
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return _plain(cfg)


def dump_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
