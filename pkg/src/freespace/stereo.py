"""Semi-global block matching on rectified grayscale pairs.

Cost volumes are laid out (H, W, D): row, column, candidate disparity.  A left
pixel at column u with disparity d corresponds to right column u - d.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolation

# (dy, dx) steps along which each path travels; the predecessor of p is p - step
PATHS_4 = ((0, 1), (0, -1), (1, 0), (-1, 0))
PATHS_8 = PATHS_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))

SUBPIXEL_EPS = 1e-12


@dataclass
class MatchParams:
    max_disparity: int = 64
    block_radius: int = 1
    p1: Optional[float] = None
    p2: Optional[float] = None
    num_paths: int = 4
    uniqueness_ratio: float = 10.0
    lr_max_diff: float = 1.0

    def __post_init__(self):
        area = (2 * self.block_radius + 1) ** 2
        if self.p1 is None:
            self.p1 = 8.0 * area
        if self.p2 is None:
            self.p2 = 32.0 * area

    def validate(self, width: Optional[int] = None) -> None:
        if self.max_disparity <= 0:
            raise ContractViolation("max_disparity must be positive")
        if width is not None and self.max_disparity > width / 2:
            raise ContractViolation(f"max_disparity {self.max_disparity} exceeds half the image width {width}")
        if self.block_radius < 0:
            raise ContractViolation("block_radius must be >= 0")
        if not self.p2 > self.p1 > 0:
            raise ContractViolation(f"need p2 > p1 > 0, got p1={self.p1}, p2={self.p2}")
        if self.num_paths not in (4, 8):
            raise ContractViolation("num_paths must be 4 or 8")
        if self.uniqueness_ratio < 0:
            raise ContractViolation("uniqueness_ratio must be >= 0")
        if self.lr_max_diff < 0:
            raise ContractViolation("lr_max_diff must be >= 0")


@dataclass
class DisparityMap:
    """Disparities in pixels. Invalid pixels hold NaN and are False in ``valid``."""

    values: np.ndarray
    valid: np.ndarray
    max_disparity: int

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean())


def _as_gray(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2:
        raise ContractViolation(f"expected a 2D grayscale image, got shape {a.shape}")
    return a.astype(np.float32)


def matching_cost(left, right, pixel, d: int, block_radius: int = 1, max_disparity: Optional[int] = None) -> float:
    """SAD between the block around ``pixel`` = (u, v) in the left image and its
    d-shifted counterpart in the right image. Out-of-image coordinates clamp to
    the border."""
    if max_disparity is not None and d >= max_disparity:
        raise ContractViolation(f"disparity {d} >= max_disparity {max_disparity}")
    if d < 0:
        raise ContractViolation("disparity must be non-negative")
    L, R = _as_gray(left), _as_gray(right)
    h, w = L.shape
    u, v = pixel
    total = 0.0
    for dy in range(-block_radius, block_radius + 1):
        y = min(max(v + dy, 0), h - 1)
        for dx in range(-block_radius, block_radius + 1):
            xl = min(max(u + dx, 0), w - 1)
            xr = min(max(u + dx - d, 0), w - 1)
            total += abs(float(L[y, xl]) - float(R[y, xr]))
    return total


def cost_volume(left, right, max_disparity: int, block_radius: int = 1) -> np.ndarray:
    """Vectorized :func:`matching_cost` for every pixel and d < max_disparity."""
    L, R = _as_gray(left), _as_gray(right)
    if L.shape != R.shape:
        raise ContractViolation(f"image size mismatch {L.shape} vs {R.shape}")
    h, w = L.shape
    r = block_radius
    D = max_disparity
    rows = np.clip(np.arange(-r, h + r), 0, h - 1)
    Lp = L[rows][:, np.clip(np.arange(-r, w + r), 0, w - 1)]
    # right columns clamp(x - d) for x in [-r, w + r); disparity d starts at offset D - 1 - d
    Rp = R[rows][:, np.clip(np.arange(-r - D + 1, w + r), 0, w - 1)]
    n = w + 2 * r
    vol = np.empty((D, h, w), dtype=np.float32)
    for d in range(D):
        diff = np.abs(Lp - Rp[:, D - 1 - d:D - 1 - d + n])
        # separable box sum; exact for integer gray levels in float32
        acc = diff[0:h].copy()
        for k in range(1, 2 * r + 1):
            acc += diff[k:k + h]
        out = vol[d]
        np.copyto(out, acc[:, 0:w])
        for k in range(1, 2 * r + 1):
            out += acc[:, k:k + w]
    return np.ascontiguousarray(vol.transpose(1, 2, 0))


def _path_step(c, pred, p1, p2, out=None, tmp=None):
    """One step of the recurrence; ``out``/``tmp`` are optional scratch buffers."""
    m = pred.min(axis=1, keepdims=True)
    if out is None:
        best = pred.copy()
    else:
        best = out
        np.copyto(best, pred)
    t = pred + p1 if tmp is None else np.add(pred, p1, out=tmp)
    np.minimum(best[:, 1:], t[:, :-1], out=best[:, 1:])
    np.minimum(best[:, :-1], t[:, 1:], out=best[:, :-1])
    np.minimum(best, m + p2, out=best)
    np.add(c, best, out=best)
    best -= m
    return best


def _scan(C, out, p1, p2, reverse, diag):
    """Accumulate path costs along axis 0 of ``C``; ``diag`` shifts axis 1 by one per step."""
    n = C.shape[0]
    order = range(n - 1, -1, -1) if reverse else range(n)
    bufs = [np.empty_like(C[0]) for _ in range(2)]
    tmp = np.empty_like(C[0])
    prev = None
    for i, idx in enumerate(order):
        cur = C[idx]
        L = bufs[i % 2]
        if prev is None:
            np.copyto(L, cur)
        elif diag == 0:
            _path_step(cur, prev, p1, p2, out=L, tmp=tmp)
        elif diag > 0:
            L[0] = cur[0]
            _path_step(cur[1:], prev[:-1], p1, p2, out=L[1:], tmp=tmp[1:])
        else:
            L[-1] = cur[-1]
            _path_step(cur[:-1], prev[1:], p1, p2, out=L[:-1], tmp=tmp[:-1])
        out[idx] += L
        prev = L


def _aggregate_direction(C, dy, dx, p1, p2, out):
    if dx != 0:
        # scan over columns on a contiguous (W, H, D) copy
        Ct = np.ascontiguousarray(C.transpose(1, 0, 2))
        acc = np.zeros_like(Ct)
        _scan(Ct, acc, p1, p2, reverse=dx < 0, diag=dy)
        out += acc.transpose(1, 0, 2)
    else:
        _scan(C, out, p1, p2, reverse=dy < 0, diag=0)


def aggregate_paths(cost: np.ndarray, params: MatchParams) -> np.ndarray:
    """Sum over scan directions of the semi-global path costs L_r."""
    C = np.asarray(cost)
    if C.ndim != 3:
        raise ContractViolation(f"cost volume must be (H, W, D), got shape {C.shape}")
    if params.num_paths not in (4, 8):
        raise ContractViolation("num_paths must be 4 or 8")
    C = C.astype(np.result_type(C.dtype, np.float32), copy=False)
    p1, p2 = C.dtype.type(params.p1), C.dtype.type(params.p2)
    paths = PATHS_4 if params.num_paths == 4 else PATHS_8
    # column scans run on a contiguous (W, H, D) copy
    Ct = np.ascontiguousarray(C.transpose(1, 0, 2))
    acc = np.zeros_like(Ct)
    for dy, dx in paths:
        if dx != 0:
            _scan(Ct, acc, p1, p2, reverse=dx < 0, diag=dy)
    out = np.ascontiguousarray(acc.transpose(1, 0, 2))
    for dy, dx in paths:
        if dx == 0:
            _scan(C, out, p1, p2, reverse=dy < 0, diag=0)
    return out


def _right_view_argmin(S):
    """Integer disparity for each right-image pixel: argmin_d S(y, xr + d, d)."""
    h, w, D = S.shape
    padded = np.full((h, w + D, D), np.inf, dtype=S.dtype)
    padded[:, :w] = S
    s0, s1, s2 = padded.strides
    skewed = np.lib.stride_tricks.as_strided(padded, shape=(h, w, D), strides=(s0, s1, s1 + s2), writeable=False)
    return skewed.argmin(axis=2)


def select_disparity(aggregated: np.ndarray, params: MatchParams, cost: Optional[np.ndarray] = None) -> DisparityMap:
    """Winner-take-all with parabola refinement, uniqueness, left-right and
    left-border checks.

    When the raw ``cost`` volume is given the parabola is fitted to it around
    the aggregated winner; the aggregated curve near its minimum is shaped
    mostly by the P1 penalty and pulls estimates toward integers.
    """
    S = np.asarray(aggregated)
    h, w, D = S.shape
    F = S if cost is None else np.asarray(cost)
    if F.shape != S.shape:
        raise ContractViolation(f"cost volume shape {F.shape} != aggregated shape {S.shape}")
    d0 = S.argmin(axis=2)
    best = np.take_along_axis(S, d0[..., None], axis=2)[..., 0].astype(np.float64)

    # best cost among candidates more than one step away from d0
    masked = S.astype(np.float64 if S.dtype == np.float64 else np.float32, copy=True)
    for k in (-1, 0, 1):
        np.put_along_axis(masked, np.clip(d0 + k, 0, D - 1)[..., None], np.inf, axis=2)
    second = masked.min(axis=2).astype(np.float64)
    unique = best * (100.0 + params.uniqueness_ratio) < second * 100.0

    disp = d0.astype(np.float64)
    inner = (d0 > 0) & (d0 < D - 1)
    mid = np.take_along_axis(F, d0[..., None], axis=2)[..., 0].astype(np.float64)
    lo = np.take_along_axis(F, np.clip(d0 - 1, 0, D - 1)[..., None], axis=2)[..., 0].astype(np.float64)
    hi = np.take_along_axis(F, np.clip(d0 + 1, 0, D - 1)[..., None], axis=2)[..., 0].astype(np.float64)
    denom = lo - 2.0 * mid + hi
    refine = inner & (denom > SUBPIXEL_EPS)
    offset = np.zeros_like(disp)
    offset[refine] = (lo[refine] - hi[refine]) / (2.0 * denom[refine])
    # stay inside the winner's cell
    disp = np.clip(disp + np.clip(offset, -0.5, 0.5), 0.0, np.nextafter(D, 0))

    d_right = _right_view_argmin(S)
    cols = np.arange(w)[None, :]
    xr = cols - d0
    inside = xr >= 0
    rows = np.arange(h)[:, None]
    lr_ok = inside & (np.abs(d_right[rows, np.clip(xr, 0, w - 1)] - d0) <= params.lr_max_diff)

    valid = unique & lr_ok & (cols >= params.max_disparity)
    values = np.where(valid, disp, np.nan)
    return DisparityMap(values=values, valid=valid, max_disparity=D)


def compute_disparity(left, right, params: Optional[MatchParams] = None) -> DisparityMap:
    params = params or MatchParams()
    L, R = _as_gray(left), _as_gray(right)
    if L.shape != R.shape:
        raise ContractViolation(f"image size mismatch {L.shape} vs {R.shape}")
    params.validate(L.shape[1])
    C = cost_volume(L, R, params.max_disparity, params.block_radius)
    return select_disparity(aggregate_paths(C, params), params, cost=C)


def discontinuity_count(dmap: DisparityMap, jump: float = 1.0) -> int:
    """Neighbor pairs (both valid) whose disparities differ by more than ``jump``."""
    v = dmap.values
    n = 0
    for a, b in ((v[:, 1:], v[:, :-1]), (v[1:], v[:-1])):
        with np.errstate(invalid="ignore"):
            n += int(np.count_nonzero(np.abs(a - b) > jump))
    return n
