"""Disparity-to-depth conversion and the projected navigation window."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ContractViolation, DegenerateDisparityError, WindowTooLargeError
from .scene import StereoRig
from .stereo import DisparityMap

DISPARITY_FLOOR = 0.1  # px; caps depth at f*B/DISPARITY_FLOOR


def depth_from_disparity(d, focal_px: float, baseline_m: float, floor: float = DISPARITY_FLOOR):
    """D = f*B/d, with d clamped up to ``floor`` first. Works on scalars and arrays."""
    if not focal_px > 0 or not baseline_m > 0:
        raise ContractViolation("focal length and baseline must be positive")
    d_eff = np.maximum(np.asarray(d, dtype=np.float64), floor)
    if not np.all(d_eff > 0):  # also rejects NaN
        raise DegenerateDisparityError("disparity <= 0 after clamping")
    D = focal_px * baseline_m / d_eff
    return float(D) if np.ndim(D) == 0 else D


def disparity_from_depth(D, focal_px: float, baseline_m: float):
    D = np.asarray(D, dtype=np.float64)
    if not np.all(D > 0):
        raise ContractViolation("depth must be positive")
    d = focal_px * baseline_m / D
    return float(d) if np.ndim(d) == 0 else d


@dataclass
class DepthMap:
    values: np.ndarray
    source: Optional[DisparityMap] = None
    d_max: float = np.inf  # reach of the map: depth of a floor-clamped disparity

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def depth_map(disparity: DisparityMap, rig: StereoRig, floor: float = DISPARITY_FLOOR) -> DepthMap:
    if disparity.values.shape != (rig.height, rig.width):
        raise ContractViolation(
            f"disparity shape {disparity.values.shape} does not match rig {rig.height}x{rig.width}"
        )
    if not np.all(disparity.valid):
        raise ContractViolation("depth_map needs a fully valid (smoothed) disparity map")
    values = depth_from_disparity(disparity.values, rig.focal_px, rig.baseline_m, floor)
    return DepthMap(values=values, source=disparity, d_max=rig.focal_px * rig.baseline_m / floor)


@dataclass(frozen=True)
class WindowSpec:
    uav_width_m: float = 1.2
    uav_height_m: float = 0.4
    d_min_m: float = 4.0
    margin_factor: float = 1.0
    blocked_fraction_threshold: float = 0.01

    def __post_init__(self):
        if not (self.uav_width_m > 0 and self.uav_height_m > 0):
            raise ContractViolation("UAV dimensions must be positive")
        if not self.d_min_m > 0:
            raise ContractViolation("d_min must be positive")
        if self.margin_factor < 1:
            raise ContractViolation("margin_factor must be >= 1")
        if not 0 <= self.blocked_fraction_threshold <= 1:
            raise ContractViolation("blocked_fraction_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class PixelRect:
    """Axis-aligned window in pixel coordinates (pixel centers on integers)."""

    cx: float
    cy: float
    half_width: float
    half_height: float

    def fits(self, width: int, height: int) -> bool:
        return (
            self.cx - self.half_width >= 0
            and self.cx + self.half_width <= width - 1
            and self.cy - self.half_height >= 0
            and self.cy + self.half_height <= height - 1
        )

    def mask(self, height: int, width: int) -> np.ndarray:
        u = np.arange(width)[None, :]
        v = np.arange(height)[:, None]
        return (np.abs(u - self.cx) <= self.half_width) & (np.abs(v - self.cy) <= self.half_height)

    def center_pixel(self):
        return int(np.floor(self.cx + 0.5)), int(np.floor(self.cy + 0.5))

    def bounds(self):
        """Inclusive integer pixel bounds (u0, v0, u1, v1)."""
        return (
            int(np.ceil(self.cx - self.half_width)),
            int(np.ceil(self.cy - self.half_height)),
            int(np.floor(self.cx + self.half_width)),
            int(np.floor(self.cy + self.half_height)),
        )


def project_window(rig: StereoRig, spec: WindowSpec) -> PixelRect:
    """UAV cross-section at distance d_min, projected around the principal point."""
    hw = rig.focal_px * (spec.uav_width_m * spec.margin_factor / 2.0) / spec.d_min_m
    hh = rig.focal_px * (spec.uav_height_m * spec.margin_factor / 2.0) / spec.d_min_m
    rect = PixelRect(rig.cx, rig.cy, hw, hh)
    if not rect.fits(rig.width, rig.height):
        raise WindowTooLargeError(
            f"window half-extents {hw:.1f}x{hh:.1f} px at d_min={spec.d_min_m} m "
            f"exceed the {rig.width}x{rig.height} image"
        )
    return rect


def centroid_depth(depth: DepthMap, rect: PixelRect) -> float:
    """Median of the 3x3 patch at the window center."""
    u, v = rect.center_pixel()
    h, w = depth.values.shape
    patch = depth.values[max(v - 1, 0):min(v + 2, h), max(u - 1, 0):min(u + 2, w)]
    return float(np.median(patch))


class Verdict(str, Enum):
    FREE = "Free"
    BLOCKED = "Blocked"


@dataclass(frozen=True)
class WindowDecision:
    verdict: Verdict
    fused_distance: float
    centroid_depth: float
    lidar_distance: Optional[float]
    blocked_pixel_fraction: float

    @property
    def blocked(self) -> bool:
        return self.verdict is Verdict.BLOCKED


def blocked_fraction(depth: DepthMap, rect: PixelRect, d_min_m: float) -> float:
    inside = depth.values[rect.mask(*depth.values.shape)]
    return float(np.count_nonzero(inside < d_min_m)) / inside.size


def classify_window(
    depth: DepthMap,
    rect: PixelRect,
    d_k: float,
    spec: WindowSpec,
    lidar_distance: Optional[float] = None,
) -> WindowDecision:
    """Blocked if the fused centroid distance is inside d_min, or if more than
    the threshold fraction of window pixels see something closer than d_min."""
    if not d_k > 0:
        raise ContractViolation(f"fused distance must be positive, got {d_k}")
    frac = blocked_fraction(depth, rect, spec.d_min_m)
    blocked = d_k < spec.d_min_m or frac > spec.blocked_fraction_threshold
    return WindowDecision(
        verdict=Verdict.BLOCKED if blocked else Verdict.FREE,
        fused_distance=float(d_k),
        centroid_depth=centroid_depth(depth, rect),
        lidar_distance=lidar_distance,
        blocked_pixel_fraction=frac,
    )


def annotate(image: np.ndarray, rect: PixelRect, decision: WindowDecision, thickness: int = 2) -> np.ndarray:
    """Copy of ``image`` with the window border drawn: 255 when Free, 0 when Blocked."""
    out = np.array(image, dtype=np.uint8, copy=True)
    h, w = out.shape
    u0, v0, u1, v1 = rect.bounds()
    gray = 0 if decision.blocked else 255
    t = thickness
    out[max(v0, 0):min(v0 + t, h), max(u0, 0):min(u1 + 1, w)] = gray
    out[max(v1 - t + 1, 0):min(v1 + 1, h), max(u0, 0):min(u1 + 1, w)] = gray
    out[max(v0, 0):min(v1 + 1, h), max(u0, 0):min(u0 + t, w)] = gray
    out[max(v0, 0):min(v1 + 1, h), max(u1 - t + 1, 0):min(u1 + 1, w)] = gray
    return out
