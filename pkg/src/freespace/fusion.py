"""Two-sensor Kalman filter for the distance ahead, plus variance calibration.

State is [distance (m), rate (m/s)] under a constant-velocity model driven by
an optional acceleration command.  Both sensors observe the distance, so the
observation matrix stacks two copies of [1, 0].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, NumericError, UninitializedStateError

# variances measured over 150 static samples at 4 m
CALIBRATED_STEREO_VARIANCE = 0.0254800198
CALIBRATED_LIDAR_VARIANCE = 0.0005798584


@dataclass(frozen=True)
class FusionConfig:
    dt: float = 0.1
    stereo_variance: float = CALIBRATED_STEREO_VARIANCE
    lidar_variance: float = CALIBRATED_LIDAR_VARIANCE
    process_cov: tuple = ((1e-4, 0.0), (0.0, 1e-4))
    control_gain: float = 1.0
    joseph: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractViolation("dt must be positive")
        if not (self.stereo_variance > 0 and self.lidar_variance > 0):
            raise ContractViolation("measurement variances must be positive")
        Q = np.asarray(self.process_cov, dtype=np.float64)
        if Q.shape != (2, 2) or not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -1e-12:
            raise ContractViolation("process_cov must be a symmetric PSD 2x2 matrix")
        object.__setattr__(self, "process_cov", tuple(tuple(float(x) for x in row) for row in Q))

    @property
    def measurement_cov(self) -> np.ndarray:
        return np.diag([self.stereo_variance, self.lidar_variance])

    @property
    def process_matrix(self) -> np.ndarray:
        return np.asarray(self.process_cov, dtype=np.float64)


@dataclass
class KalmanState:
    x: np.ndarray = field(default_factory=lambda: np.zeros(2))
    P: np.ndarray = field(default_factory=lambda: np.eye(2))
    initialized: bool = False
    timestamp: Optional[float] = None

    def dump(self) -> str:
        return (
            f"t={self.timestamp} x=[{self.x[0]:.6f}, {self.x[1]:.6f}] "
            f"P=[[{self.P[0, 0]:.6e}, {self.P[0, 1]:.6e}], [{self.P[1, 0]:.6e}, {self.P[1, 1]:.6e}]]"
        )


@dataclass(frozen=True)
class Measurement:
    stereo_depth: float
    lidar: Optional[float] = None
    timestamp: float = 0.0
    lidar_valid: bool = True

    @property
    def has_lidar(self) -> bool:
        return self.lidar_valid and self.lidar is not None


def _require_init(state: KalmanState):
    if not state.initialized:
        raise UninitializedStateError("Kalman state has not been initialized")


def transition(dt: float) -> np.ndarray:
    return np.array([[1.0, dt], [0.0, 1.0]])


def control_matrix(dt: float, gain: float = 1.0) -> np.ndarray:
    return gain * np.array([dt * dt / 2.0, dt])


def initial_state(m: Measurement, cfg: FusionConfig) -> KalmanState:
    values = [m.stereo_depth] + ([m.lidar] if m.has_lidar else [])
    x = np.array([float(np.mean(values)), 0.0])
    P = np.diag([max(cfg.stereo_variance, cfg.lidar_variance) * 10.0, 1.0])
    return KalmanState(x=x, P=P, initialized=True, timestamp=m.timestamp)


def kf_predict(state: KalmanState, cfg: FusionConfig, u: Optional[float] = None, dt: Optional[float] = None) -> KalmanState:
    _require_init(state)
    dt = cfg.dt if dt is None else dt
    if dt < 0:
        raise ContractViolation("dt must be non-negative")
    A = transition(dt)
    x = A @ state.x
    if u:
        x = x + control_matrix(dt, cfg.control_gain) * u
    P = A @ state.P @ A.T + cfg.process_matrix
    P = 0.5 * (P + P.T)
    t = None if state.timestamp is None else state.timestamp + dt
    return KalmanState(x=x, P=P, initialized=True, timestamp=t)


def kf_update(state: KalmanState, m: Measurement, cfg: FusionConfig) -> KalmanState:
    """Measurement update with C = [[1, 0], [1, 0]] (one row when the LiDAR is out).

    Every row observes the distance, so C P C^T + R is a rank-one term plus a
    diagonal and its inverse has a closed form (Sherman-Morrison).  This avoids
    inverting a nearly singular matrix when the prior is vague.
    """
    _require_init(state)
    if m.has_lidar:
        y = np.array([m.stereo_depth, m.lidar], dtype=np.float64)
        r = np.array([cfg.stereo_variance, cfg.lidar_variance])
    else:
        y = np.array([m.stereo_depth], dtype=np.float64)
        r = np.array([cfg.stereo_variance])
    w = 1.0 / r
    W = w.sum()
    P = state.P
    s = 1.0 + P[0, 0] * W
    if not (np.isfinite(s) and s > 0):
        raise NumericError(f"innovation covariance not invertible (1 + P00 * sum(1/R) = {s})")
    p = P[:, 0]
    K = np.outer(p, w) / s  # P C^T (C P C^T + R)^-1
    x = state.x + p * (w @ (y - state.x[0])) / s
    if cfg.joseph:
        C = np.zeros((len(y), 2))
        C[:, 0] = 1.0
        I_KC = np.eye(2) - K @ C
        P_new = I_KC @ P @ I_KC.T + K @ np.diag(r) @ K.T
    else:
        # (I - K C) P, written so the position terms carry no cancellation
        P_new = np.array([
            [P[0, 0] / s, P[0, 1] / s],
            [P[1, 0] / s, P[1, 1] - P[1, 0] * P[0, 1] * W / s],
        ])
    P_new = 0.5 * (P_new + P_new.T)
    return KalmanState(x=x, P=P_new, initialized=True, timestamp=m.timestamp)


def fused_distance(state: KalmanState) -> float:
    _require_init(state)
    return float(state.x[0])


class DistanceFilter:
    """Stateful wrapper: initializes on the first measurement, afterwards
    predicts over the timestamp gap and updates."""

    def __init__(self, cfg: FusionConfig):
        self.cfg = cfg
        self.state = KalmanState()

    def step(self, m: Measurement, u: Optional[float] = None) -> float:
        if not self.state.initialized:
            self.state = initial_state(m, self.cfg)
        else:
            dt = m.timestamp - self.state.timestamp
            self.state = kf_predict(self.state, self.cfg, u=u, dt=dt)
            self.state = kf_update(self.state, m, self.cfg)
        return fused_distance(self.state)


def sample_variance(samples: Sequence[float]) -> float:
    """Unbiased sample variance, sum((x - mean)^2) / (n - 1)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise ContractViolation("sample variance needs at least two samples")
    d = x - x[0]  # shifted data: constant samples give exactly zero
    mean = d.sum() / d.size
    return float(((d - mean) ** 2).sum() / (d.size - 1))


def calibrate(scene, rig, pose, n: int = 150, seed: int = 0, *, lidar=None, match=None, wls=None,
              window=None, noise=None):
    """Estimate (stereo variance, LiDAR variance) from ``n`` static samples.

    Every sample runs the stereo pipeline on a freshly noised image pair and
    takes one LiDAR reading.  A LiDAR target out of range raises
    :class:`~freespace.errors.OutOfRangeError`.
    """
    from . import measure
    from .scene import LidarModel, lidar_sample

    if n < 2:
        raise ContractViolation("calibration needs n >= 2 samples")
    lidar = lidar or LidarModel()
    noise = noise or measure.SensorNoise()
    seeds = np.random.SeedSequence(seed).spawn(n)
    cached = None
    stereo, ranges = [], []
    for ss in seeds:
        rng_img, rng_depth, rng_lidar = (np.random.default_rng(s) for s in ss.spawn(3))
        if noise.image_noise_std > 0 or cached is None:
            frame = measure.measure_stereo(scene, rig, pose, match=match, wls=wls, window=window,
                                           image_noise_std=noise.image_noise_std, rng=rng_img)
            cached = frame.centroid_depth
        d_c = cached
        if noise.stereo_depth_noise_variance > 0:
            d_c += rng_depth.normal(0.0, np.sqrt(noise.stereo_depth_noise_variance))
        stereo.append(d_c)
        ranges.append(lidar_sample(scene, rig, pose, lidar, rng_lidar, strict=True))
    return sample_variance(stereo), sample_variance(ranges)
