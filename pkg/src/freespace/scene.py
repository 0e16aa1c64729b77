"""Synthetic world: textured primitives, pinhole stereo rendering and a 1D LiDAR.

Frames follow the usual camera convention: x right, y down, z forward.  A pose
with yaw 0 looks along world +z; positive yaw turns the optical axis toward +x.
Pixel (u, v) means column u, row v, with pixel centers on integer coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ContractViolation, OutOfRangeError

HIT_EPS = 1e-9
NORM_TOL = 1e-9


def _vec3(v, name):
    a = tuple(float(x) for x in v)
    if len(a) != 3:
        raise ContractViolation(f"{name} must have 3 components, got {len(a)}")
    return a


def _check_gray(g, name):
    if not 0.0 <= g <= 255.0:
        raise ContractViolation(f"{name}={g} outside [0, 255]")


# ---------------------------------------------------------------------------
# Textures


@dataclass(frozen=True)
class Checker:
    scale: float = 0.25
    low: float = 60.0
    high: float = 200.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractViolation("checker scale must be positive")
        _check_gray(self.low, "checker low")
        _check_gray(self.high, "checker high")

    def gray(self, coords: np.ndarray) -> np.ndarray:
        cells = np.floor(coords / self.scale).astype(np.int64).sum(axis=1)
        return np.where(cells % 2 == 0, self.low, self.high)


@dataclass(frozen=True)
class ValueNoise:
    """Lattice value noise, smoothstep-interpolated, summed over octaves."""

    scale: float = 0.1
    amplitude: float = 80.0
    base: float = 128.0
    octaves: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractViolation("value-noise scale must be positive")
        if self.amplitude < 0:
            raise ContractViolation("value-noise amplitude must be non-negative")
        if self.octaves < 1:
            raise ContractViolation("value-noise octaves must be >= 1")
        _check_gray(self.base, "value-noise base")

    def gray(self, coords: np.ndarray) -> np.ndarray:
        total = np.zeros(len(coords))
        weight_sum = 0.0
        for octave in range(self.octaves):
            w = 0.5 ** octave
            total += w * _lattice_noise(coords * (2.0 ** octave) / self.scale, self.seed + octave)
            weight_sum += w
        n = total / weight_sum
        return np.clip(self.base + self.amplitude * (2.0 * n - 1.0), 0.0, 255.0)


Texture = Union[Checker, ValueNoise]


def _hash_unit(cells: np.ndarray, seed: int) -> np.ndarray:
    # splitmix64 finalizer over a per-axis mix; uint64 arithmetic wraps
    h = np.full(len(cells), (seed * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    primes = (0x8DA6B343, 0xD8163841, 0xCB1AB31F)
    for axis in range(cells.shape[1]):
        h ^= cells[:, axis].astype(np.uint64) * np.uint64(primes[axis])
        h += np.uint64(0x9E3779B97F4A7C15)
        h ^= h >> np.uint64(30)
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(27)
        h *= np.uint64(0x94D049BB133111EB)
        h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _lattice_noise(p: np.ndarray, seed: int) -> np.ndarray:
    base = np.floor(p)
    frac = p - base
    fade = frac * frac * (3.0 - 2.0 * frac)
    base = base.astype(np.int64)
    k = p.shape[1]
    out = np.zeros(len(p))
    for corner in range(1 << k):
        offs = np.array([(corner >> a) & 1 for a in range(k)], dtype=np.int64)
        wt = np.prod(np.where(offs == 1, fade, 1.0 - fade), axis=1)
        out += wt * _hash_unit(base + offs, seed)
    return out


# ---------------------------------------------------------------------------
# Primitives. Each exposes ``intersect(o, d) -> (t, coords)`` over ray batches;
# t is +inf on a miss, coords are the texture-space coordinates of the hit.


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    texture: Texture = field(default_factory=Checker)

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "sphere center"))
        if not self.radius > 0:
            raise ContractViolation("sphere radius must be positive")

    def intersect(self, o, d):
        oc = o - np.asarray(self.center)
        b = np.einsum("ij,ij->i", oc, d)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius ** 2
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0, t1 = -b - sq, -b + sq
        t = np.where(t0 > HIT_EPS, t0, np.where(t1 > HIT_EPS, t1, np.inf))
        t = np.where(ok, t, np.inf)
        hit = o + np.where(np.isfinite(t), t, 0.0)[:, None] * d
        return t, hit


@dataclass(frozen=True)
class Box:
    """Axis-aligned box."""

    lo: tuple
    hi: tuple
    texture: Texture = field(default_factory=Checker)

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec3(self.lo, "box min"))
        object.__setattr__(self, "hi", _vec3(self.hi, "box max"))
        if not all(a < b for a, b in zip(self.lo, self.hi)):
            raise ContractViolation("box min must be < max component-wise")

    def intersect(self, o, d):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
        par = d == 0.0
        inside = (o >= lo) & (o <= hi)
        tmin_ax = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        tmax_ax = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        near = tmin_ax.max(axis=1)
        far = tmax_ax.min(axis=1)
        near_axis = tmin_ax.argmax(axis=1)
        far_axis = tmax_ax.argmin(axis=1)
        ok = (near <= far) & (far > HIT_EPS)
        front = near > HIT_EPS
        t = np.where(ok, np.where(front, near, far), np.inf)
        axis = np.where(front, near_axis, far_axis)
        hit = o + np.where(np.isfinite(t), t, 0.0)[:, None] * d
        # texture lives on the face: drop the face-normal axis
        keep = np.array([[1, 2], [0, 2], [0, 1]])[axis]
        coords = np.take_along_axis(hit, keep, axis=1)
        return t, coords


@dataclass(frozen=True)
class Plane:
    """Infinite plane {x : normal . x = offset}."""

    normal: tuple
    offset: float
    texture: Texture = field(default_factory=Checker)

    def __post_init__(self):
        n = np.asarray(_vec3(self.normal, "plane normal"))
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ContractViolation("plane normal must be non-zero")
        object.__setattr__(self, "normal", tuple(n / norm))

    def _basis(self):
        n = np.asarray(self.normal)
        helper = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        t1 = np.cross(helper, n)
        t1 /= np.linalg.norm(t1)
        return t1, np.cross(n, t1)

    def intersect(self, o, d):
        n = np.asarray(self.normal)
        denom = d @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offset - o @ n) / denom
        t = np.where((denom != 0.0) & (t > HIT_EPS), t, np.inf)
        hit = o + np.where(np.isfinite(t), t, 0.0)[:, None] * d
        t1, t2 = self._basis()
        return t, np.stack([hit @ t1, hit @ t2], axis=1)


Primitive = Union[Sphere, Box, Plane]


@dataclass
class Scene:
    primitives: list = field(default_factory=list)
    background: float = 0.0

    def __post_init__(self):
        _check_gray(self.background, "background")

    def with_primitive(self, prim: Primitive) -> "Scene":
        return Scene(list(self.primitives) + [prim], self.background)


# ---------------------------------------------------------------------------
# Sensors


@dataclass(frozen=True)
class StereoRig:
    focal_px: float = 500.0
    baseline_m: float = 0.12
    width: int = 640
    height: int = 480
    principal_point: Optional[tuple] = None
    lidar_offset_m: tuple = (0.06, 0.0, 0.0)

    def __post_init__(self):
        if not self.focal_px > 0 or not self.baseline_m > 0:
            raise ContractViolation("focal length and baseline must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ContractViolation(f"image size must be positive, got {self.width}x{self.height}")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point", ((self.width - 1) / 2.0, (self.height - 1) / 2.0))
        cx, cy = (float(c) for c in self.principal_point)
        object.__setattr__(self, "principal_point", (cx, cy))
        if not (0 <= cx <= self.width - 1 and 0 <= cy <= self.height - 1):
            raise ContractViolation("principal point outside the image")
        object.__setattr__(self, "lidar_offset_m", _vec3(self.lidar_offset_m, "lidar offset"))

    @property
    def cx(self) -> float:
        return self.principal_point[0]

    @property
    def cy(self) -> float:
        return self.principal_point[1]


@dataclass(frozen=True)
class Pose:
    position: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "pose position"))
        if not -math.pi <= self.yaw <= math.pi:
            raise ContractViolation("yaw must lie in [-pi, pi]")

    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    def moved(self, dz: float) -> "Pose":
        x, y, z = self.position
        return Pose((x, y, z + dz), self.yaw)


@dataclass(frozen=True)
class LidarModel:
    min_range_m: float = 0.2
    max_range_m: float = 100.0
    resolution_m: float = 0.01
    noise_variance_m2: float = 0.0005798584

    def __post_init__(self):
        if not 0 < self.min_range_m < self.max_range_m:
            raise ContractViolation("need 0 < min_range < max_range")
        if not self.resolution_m > 0:
            raise ContractViolation("resolution must be positive")
        if self.noise_variance_m2 < 0:
            raise ContractViolation("noise variance must be non-negative")


@dataclass
class StereoFrame:
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray  # z in the left camera frame, +inf where nothing was hit


# ---------------------------------------------------------------------------
# Ray casting


def cast_rays(scene: Scene, origins: np.ndarray, directions: np.ndarray):
    """Nearest hit for a batch of rays.

    Returns ``(distance, gray)``; misses have distance +inf and the scene
    background gray.
    """
    o = np.broadcast_to(np.asarray(origins, dtype=np.float64), directions.shape)
    d = np.asarray(directions, dtype=np.float64)
    best = np.full(len(d), np.inf)
    gray = np.full(len(d), float(scene.background))
    for prim in scene.primitives:
        t, coords = prim.intersect(o, d)
        closer = t < best
        if closer.any():
            best = np.where(closer, t, best)
            gray[closer] = prim.texture.gray(coords[closer])
    return best, gray


def ray_cast(scene: Scene, origin: Sequence[float], direction: Sequence[float]):
    """Single ray. Returns ``(distance, gray)`` or ``None`` on a miss."""
    d = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    if abs(np.linalg.norm(d) - 1.0) > NORM_TOL:
        raise ContractViolation(f"direction not normalized (|d|={np.linalg.norm(d)!r})")
    o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    t, g = cast_rays(scene, o, d)
    if not np.isfinite(t[0]):
        return None
    return float(t[0]), float(g[0])


def pixel_rays(rig: StereoRig) -> np.ndarray:
    """Unit ray directions in the camera frame, shape (H, W, 3)."""
    u = np.arange(rig.width, dtype=np.float64)
    v = np.arange(rig.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    d = np.stack([(uu - rig.cx) / rig.focal_px, (vv - rig.cy) / rig.focal_px, np.ones_like(uu)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def camera_centers(rig: StereoRig, pose: Pose):
    R = pose.rotation()
    left = np.asarray(pose.position)
    right = left + R @ np.array([rig.baseline_m, 0.0, 0.0])
    return left, right


def _to_uint8(gray, noise_std, rng):
    if noise_std > 0:
        gray = gray + rng.normal(0.0, noise_std, size=gray.shape)
    return np.clip(np.round(gray), 0, 255).astype(np.uint8)


def render_stereo(scene: Scene, rig: StereoRig, pose: Pose, noise_std: float = 0.0, rng=None) -> StereoFrame:
    """Ray-cast a rectified stereo pair and the left-frame truth depth.

    ``noise_std`` adds Gaussian sensor noise (gray levels) to both images;
    ``rng`` is a seed or ``numpy.random.Generator`` and is required when noise is on.
    """
    if rig.width <= 0 or rig.height <= 0:
        raise ContractViolation("zero-size image")
    if noise_std < 0:
        raise ContractViolation("noise_std must be non-negative")
    R = pose.rotation()
    cam_dirs = pixel_rays(rig).reshape(-1, 3)
    world_dirs = cam_dirs @ R.T
    left_c, right_c = camera_centers(rig, pose)
    shape = (rig.height, rig.width)

    t_left, g_left = cast_rays(scene, left_c, world_dirs)
    _, g_right = cast_rays(scene, right_c, world_dirs)
    depth = np.where(np.isfinite(t_left), t_left * cam_dirs[:, 2], np.inf).reshape(shape)

    gen = np.random.default_rng(rng) if noise_std > 0 else None
    left = _to_uint8(g_left.reshape(shape), noise_std, gen)
    right = _to_uint8(g_right.reshape(shape), noise_std, gen)
    return StereoFrame(left=left, right=right, depth=depth)


def optical_axis_distance(scene: Scene, pose: Pose, offset=(0.0, 0.0, 0.0)) -> float:
    """Noise-free range along the optical axis from ``offset`` (camera frame); +inf on a miss."""
    R = pose.rotation()
    origin = np.asarray(pose.position) + R @ np.asarray(offset, dtype=np.float64)
    t, _ = cast_rays(scene, origin.reshape(1, 3), (R @ np.array([0.0, 0.0, 1.0])).reshape(1, 3))
    return float(t[0])


def lidar_sample(scene: Scene, rig: StereoRig, pose: Pose, model: LidarModel, rng=None, strict: bool = False):
    """One 1D-LiDAR reading in meters, or ``None`` when the target is out of range.

    With ``strict=True`` an out-of-range target raises :class:`OutOfRangeError`
    instead.  Noise is zero-mean Gaussian, then the reading is quantized to the
    sensor resolution.
    """
    true = optical_axis_distance(scene, pose, rig.lidar_offset_m)
    if not model.min_range_m <= true <= model.max_range_m:
        if strict:
            raise OutOfRangeError(
                f"target at {true} m outside [{model.min_range_m}, {model.max_range_m}] m"
            )
        return None
    reading = true
    if model.noise_variance_m2 > 0:
        gen = np.random.default_rng(rng)
        reading += gen.normal(0.0, math.sqrt(model.noise_variance_m2))
    steps = round(reading / model.resolution_m)
    # format through the resolution's decimal precision so readings are exact multiples
    decimals = max(0, -int(math.floor(math.log10(model.resolution_m))) + 1)
    return round(steps * model.resolution_m, decimals)
