"""Edge-preserving weighted-least-squares smoothing of disparity maps.

The energy minimized is

    sum_p m_p (u_p - f_p)^2 + lam * sum_{p~q} w_pq (u_p - u_q)^2

with m_p = 1 on valid input pixels and 0 on holes, and guide weights
w_pq = exp(-|g_p - g_q| / sigma_color).  Two solvers are provided:

* ``"fgs"``: alternating 1D row/column passes with a decreasing lambda
  schedule (fast, approximate).  Used by the pipeline.
* ``"exact"``: the 2D minimizer, by conjugate gradients preconditioned with
  the average of the row-wise and column-wise tridiagonal solves, warm
  started from the ``"fgs"`` result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NoValidPixelsError, SingularSystemError
from .stereo import DisparityMap

log = logging.getLogger(__name__)

# keeps every row/column chain connected so each 1D system stays solvable
WEIGHT_FLOOR = 1e-12
# lower bound on lam * w so couplings stay normal floats and pivots never underflow to zero
COUPLING_FLOOR = 1e-290


@dataclass
class WlsParams:
    lam: float = 8000.0
    sigma_color: float = 1.5
    iterations: int = 3
    solver: str = "fgs"
    tol: float = 1e-10
    max_cg_iterations: int = 5000

    def __post_init__(self):
        if self.lam < 0:
            raise ContractViolation("lambda must be >= 0")
        if not self.sigma_color > 0:
            raise ContractViolation("sigma_color must be > 0")
        if self.iterations < 1:
            raise ContractViolation("iterations must be >= 1")
        if self.solver not in ("fgs", "exact"):
            raise ContractViolation(f"unknown WLS solver {self.solver!r}")


@dataclass
class TridiagonalSystem:
    """``lower``/``upper`` have n-1 entries; ``lower[i]`` couples row i+1 to i."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def matrix(self) -> np.ndarray:
        n = len(self.diag)
        A = np.diag(np.asarray(self.diag, dtype=np.float64))
        if n > 1:
            A += np.diag(self.lower, -1) + np.diag(self.upper, 1)
        return A


def thomas(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas algorithm along the last axis; leading axes are independent systems."""
    diag = np.asarray(diag, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    n = diag.shape[-1]
    cp = np.empty_like(diag)
    dp = np.empty(np.broadcast_shapes(diag.shape, rhs.shape))
    piv = diag[..., 0]
    if np.any(piv == 0):
        raise SingularSystemError("zero pivot at row 0")
    cp[..., 0] = upper[..., 0] / piv if n > 1 else 0.0
    dp[..., 0] = rhs[..., 0] / piv
    for i in range(1, n):
        piv = diag[..., i] - lower[..., i - 1] * cp[..., i - 1]
        if np.any(piv == 0):
            raise SingularSystemError(f"zero pivot at row {i}")
        if i < n - 1:
            cp[..., i] = upper[..., i] / piv
        dp[..., i] = (rhs[..., i] - lower[..., i - 1] * dp[..., i - 1]) / piv
    x = np.empty_like(dp)
    x[..., -1] = dp[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = dp[..., i] - cp[..., i] * x[..., i + 1]
    return x


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    n = len(system.diag)
    if len(system.rhs) != n or len(system.lower) != max(n - 1, 0) or len(system.upper) != max(n - 1, 0):
        raise ContractViolation("inconsistent tridiagonal system lengths")
    return thomas(system.lower, system.diag, system.upper, system.rhs)


def guide_weights(guide: np.ndarray, sigma_color: float):
    """Horizontal (H, W-1) and vertical (H-1, W) neighbor weights."""
    g = np.asarray(guide, dtype=np.float64)
    wx = np.maximum(np.exp(-np.abs(np.diff(g, axis=1)) / sigma_color), WEIGHT_FLOOR)
    wy = np.maximum(np.exp(-np.abs(np.diff(g, axis=0)) / sigma_color), WEIGHT_FLOOR)
    return wx, wy


def lambda_schedule(lam: float, iterations: int) -> list:
    T = iterations
    return [1.5 * lam * 4.0 ** (T - t) / (4.0 ** T - 1.0) for t in range(1, T + 1)]


def _row_pass(u, data, w, lam):
    """Minimize each row's 1D energy; rows without any data weight are skipped."""
    rows = data.any(axis=1)
    if not rows.any():
        return u, data
    c = data[rows].astype(np.float64)
    ww = np.maximum(lam * w[rows], COUPLING_FLOOR)
    deg = np.zeros_like(c)
    deg[:, :-1] += ww
    deg[:, 1:] += ww
    out = u.copy()
    out[rows] = thomas(-ww, c + deg, -ww, c * u[rows])
    filled = data.copy()
    filled[rows] = True
    return out, filled


def _nearest_fill_rows(u, data):
    h, w = u.shape
    idx = np.arange(w)[None, :].repeat(h, axis=0)
    prev = np.where(data, idx, -1)
    np.maximum.accumulate(prev, axis=1, out=prev)
    nxt = np.where(data, idx, w)
    nxt = np.minimum.accumulate(nxt[:, ::-1], axis=1)[:, ::-1]
    use_prev = (prev >= 0) & ((nxt >= w) | (idx - prev <= nxt - idx))
    src = np.where(use_prev, prev, nxt)
    rows = data.any(axis=1)
    out = u.copy()
    r = np.nonzero(rows)[0]
    out[r] = np.take_along_axis(u[r], src[r], axis=1)
    filled = data.copy()
    filled[r] = True
    return out, filled


def _fgs(f, data, wx, wy, params):
    u = np.where(data, f, 0.0)
    for lam_t in lambda_schedule(params.lam, params.iterations):
        u, data = _row_pass(u, data, wx, lam_t)
        uT, dT = _row_pass(u.T, data.T, wy.T, lam_t)
        u, data = uT.T, dT.T
    return u


def wls_operator(mask, wx, wy, lam):
    """Matrix-free product with M + lam * L_w (the 2D normal-equation matrix)."""
    m = mask.astype(np.float64)
    ax, ay = np.maximum(lam * wx, COUPLING_FLOOR), np.maximum(lam * wy, COUPLING_FLOOR)

    def apply(u):
        r = m * u
        d = np.diff(u, axis=1) * ax
        r[:, :-1] -= d
        r[:, 1:] += d
        d = np.diff(u, axis=0) * ay
        r[:-1] -= d
        r[1:] += d
        return r

    return apply


def _exact(f, mask, wx, wy, params, x0):
    lam = params.lam
    A = wls_operator(mask, wx, wy, lam)
    b = np.where(mask, f, 0.0)
    ax, ay = np.maximum(lam * wx, COUPLING_FLOOR), np.maximum(lam * wy, COUPLING_FLOOR)
    diag = mask.astype(np.float64)
    diag[:, :-1] += ax
    diag[:, 1:] += ax
    diag[:-1] += ay
    diag[1:] += ay

    def precond(r):
        zr = thomas(-ax, diag, -ax, r)
        zc = thomas(-ay.T, diag.T, -ay.T, r.T).T
        return 0.5 * (zr + zc)

    scale = np.abs(b).max()
    if scale == 0:
        return np.zeros_like(b)
    u = x0.copy()
    r = b - A(u)
    z = precond(r)
    p = z.copy()
    rz = float((r * z).sum())
    for _ in range(params.max_cg_iterations):
        if np.abs(r).max() <= params.tol * scale:
            return u
        Ap = A(p)
        pAp = float((p * Ap).sum())
        if not pAp > 0:  # search direction vanished at machine precision
            return u
        alpha = rz / pAp
        u += alpha * p
        r -= alpha * Ap
        z = precond(r)
        rz_new = float((r * z).sum())
        p = z + (rz_new / rz) * p
        rz = rz_new
    log.warning("exact WLS solve stopped after %d iterations (residual %.3g)", params.max_cg_iterations,
                np.abs(r).max() / scale)
    return u


def wls_smooth(disparity: DisparityMap, guide, params: WlsParams = None) -> DisparityMap:
    """Smooth and hole-fill a disparity map guided by the left image. The result
    is valid everywhere."""
    params = params or WlsParams()
    g = np.asarray(guide, dtype=np.float64)
    if g.shape != disparity.values.shape:
        raise ContractViolation(f"guide shape {g.shape} != disparity shape {disparity.values.shape}")
    mask = np.asarray(disparity.valid, dtype=bool)
    if not mask.any():
        raise NoValidPixelsError("disparity map has no valid pixel to anchor the fill")
    f = np.where(mask, np.nan_to_num(disparity.values), 0.0)

    if params.lam == 0:
        u, filled = _nearest_fill_rows(f, mask)
        uT, _ = _nearest_fill_rows(u.T, filled.T)
        u = uT.T
    else:
        wx, wy = guide_weights(g, params.sigma_color)
        u = _fgs(f, mask, wx, wy, params)
        if params.solver == "exact":
            u = _exact(f, mask, wx, wy, params, u)
    lo, hi = f[mask].min(), f[mask].max()
    # convex-combination bound; only rounding can cross it
    u = np.clip(u, lo, hi)
    return DisparityMap(values=u, valid=np.ones_like(mask), max_disparity=disparity.max_disparity)
