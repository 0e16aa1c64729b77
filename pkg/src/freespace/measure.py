"""One frame of the stereo chain: render, match, smooth, depth, window centroid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolation
from .scene import Pose, Scene, StereoFrame, StereoRig, render_stereo
from .stereo import DisparityMap, MatchParams, compute_disparity
from .window import DepthMap, PixelRect, WindowSpec, centroid_depth, depth_map, project_window
from .wls import WlsParams, wls_smooth

MIN_DEPTH_M = 1e-3


@dataclass(frozen=True)
class SensorNoise:
    """``image_noise_std`` is Gaussian pixel noise in gray levels.
    ``stereo_depth_noise_variance`` (m^2) adds one Gaussian range offset per frame
    to the whole depth map, so the centroid reading carries exactly that variance
    on top of whatever the matcher contributes."""

    image_noise_std: float = 0.0
    stereo_depth_noise_variance: float = 0.0

    def __post_init__(self):
        if self.image_noise_std < 0 or self.stereo_depth_noise_variance < 0:
            raise ContractViolation("noise levels must be non-negative")


@dataclass
class StereoMeasurement:
    frame: StereoFrame
    raw: DisparityMap
    smoothed: DisparityMap
    depth: DepthMap
    rect: PixelRect
    centroid_depth: float


def measure_stereo(
    scene: Scene,
    rig: StereoRig,
    pose: Pose,
    match: Optional[MatchParams] = None,
    wls: Optional[WlsParams] = None,
    window: Optional[WindowSpec] = None,
    image_noise_std: float = 0.0,
    depth_noise_variance: float = 0.0,
    rng=None,
    depth_rng=None,
) -> StereoMeasurement:
    rng = np.random.default_rng(rng)
    frame = render_stereo(scene, rig, pose, image_noise_std, rng)
    raw = compute_disparity(frame.left, frame.right, match or MatchParams())
    if raw.valid.any():
        smoothed = wls_smooth(raw, frame.left, wls or WlsParams())
    else:
        # nothing textured in view: saturate at the depth map's reach
        smoothed = DisparityMap(np.zeros(raw.values.shape), np.ones(raw.values.shape, dtype=bool), raw.max_disparity)
    depth = depth_map(smoothed, rig)
    if depth_noise_variance > 0:
        gen = rng if depth_rng is None else np.random.default_rng(depth_rng)
        offset = gen.normal(0.0, math.sqrt(depth_noise_variance))
        depth.values = np.maximum(depth.values + offset, MIN_DEPTH_M)
    rect = project_window(rig, window or WindowSpec())
    return StereoMeasurement(frame, raw, smoothed, depth, rect, centroid_depth(depth, rect))
