import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from freespace.errors import ContractViolation, NoValidPixelsError, SingularSystemError
from freespace.stereo import DisparityMap
from freespace.wls import (
    WlsParams, TridiagonalSystem, _row_pass, guide_weights, lambda_schedule, solve_tridiagonal, thomas,
    wls_operator, wls_smooth,
)
from oracles import dense_wls
from wls_cases import block_instance


def dmap(values, valid=None):
    values = np.asarray(values, dtype=float)
    valid = ~np.isnan(values) if valid is None else valid
    return DisparityMap(np.where(valid, values, np.nan), valid, 64)


class TestTridiagonal:
    def test_identity(self):
        b = np.array([3.0, -1.0, 7.5, 0.25])
        x = solve_tridiagonal(TridiagonalSystem(np.zeros(3), np.ones(4), np.zeros(3), b))
        np.testing.assert_array_equal(x, b)

    def test_three_by_three(self):
        sysm = TridiagonalSystem(np.ones(2), np.full(3, 2.0), np.ones(2), np.array([1.0, 2.0, 3.0]))
        x = solve_tridiagonal(sysm)
        np.testing.assert_allclose(x, np.linalg.solve(sysm.matrix(), sysm.rhs), atol=1e-15)
        # by hand: 2a + b = 1, a + 2b + c = 2, b + 2c = 3
        np.testing.assert_allclose(x, [0.5, 0.0, 1.5], atol=1e-15)

    def test_single_unknown(self):
        x = solve_tridiagonal(TridiagonalSystem(np.zeros(0), np.array([5.0]), np.zeros(0), np.array([10.0])))
        np.testing.assert_array_equal(x, [2.0])

    def test_zero_pivot(self):
        with pytest.raises(SingularSystemError):
            solve_tridiagonal(TridiagonalSystem(np.ones(1), np.array([0.0, 1.0]), np.ones(1), np.ones(2)))
        with pytest.raises(SingularSystemError):
            # second pivot 1 - 1*1/1 = 0
            solve_tridiagonal(TridiagonalSystem(np.ones(1), np.ones(2), np.ones(1), np.ones(2)))

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            solve_tridiagonal(TridiagonalSystem(np.ones(3), np.ones(3), np.ones(2), np.ones(3)))

    @given(st.integers(1, 30), st.integers(0, 2**31))
    def test_matches_dense_solve(self, n, seed):
        rng = np.random.default_rng(seed)
        lo, up = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
        diag = np.abs(np.r_[lo, 0]) + np.abs(np.r_[0, up]) + rng.uniform(0.1, 2, n)
        sysm = TridiagonalSystem(lo, diag, up, rng.normal(size=n))
        x = solve_tridiagonal(sysm)
        A = sysm.matrix()
        np.testing.assert_allclose(x, np.linalg.solve(A, sysm.rhs), rtol=1e-9, atol=1e-9)
        # residual bound relative to the problem scale
        assert np.abs(A @ x - sysm.rhs).max() <= 1e-12 * (np.abs(A).max() * np.abs(x).max() + 1)

    def test_batched(self):
        rng = np.random.default_rng(0)
        lo, up = rng.uniform(-1, 0, (5, 7)), rng.uniform(-1, 0, (5, 7))
        diag = 3.0 + rng.uniform(0, 1, (5, 8))
        b = rng.normal(size=(5, 8))
        x = thomas(lo, diag, up, b)
        for i in range(5):
            A = TridiagonalSystem(lo[i], diag[i], up[i], b[i]).matrix()
            np.testing.assert_allclose(A @ x[i], b[i], atol=1e-12)


class TestSmoothing:
    def test_lambda_zero_keeps_data_and_fills_along_rows(self):
        v = np.array([[1.0, np.nan, np.nan, 7.0, np.nan],
                      [np.nan, np.nan, np.nan, np.nan, np.nan],
                      [np.nan, 2.0, np.nan, np.nan, np.nan]])
        out = wls_smooth(dmap(v), np.zeros(v.shape), WlsParams(lam=0.0))
        valid = ~np.isnan(v)
        np.testing.assert_array_equal(out.values[valid], v[valid])
        np.testing.assert_array_equal(out.values[0], [1, 1, 7, 7, 7])
        np.testing.assert_array_equal(out.values[2], [2, 2, 2, 2, 2])
        assert out.valid.all()

    @pytest.mark.parametrize("solver", ["fgs", "exact"])
    @pytest.mark.parametrize("lam", [0.0, 1.0, 8000.0])
    def test_constant_map_unchanged(self, lam, solver):
        rng = np.random.default_rng(0)
        v = np.full((12, 14), 17.25)
        valid = rng.random(v.shape) > 0.4
        out = wls_smooth(dmap(v, valid), rng.integers(0, 256, v.shape), WlsParams(lam=lam, solver=solver))
        np.testing.assert_allclose(out.values, 17.25, atol=1e-9)

    def test_step_edge_kept_with_matching_guide(self):
        v = np.where(np.arange(16)[None, :] < 8, 10.0, 20.0).repeat(16, axis=0)
        guide = np.where(np.arange(16)[None, :] < 8, 50.0, 200.0).repeat(16, axis=0)
        for solver in ("fgs", "exact"):
            out = wls_smooth(dmap(v), guide, WlsParams(solver=solver)).values
            cols = np.argmax(np.abs(np.diff(out, axis=1)), axis=1)
            assert np.all(np.abs(cols - 7) <= 1)
            np.testing.assert_allclose(out, v, atol=1e-3)

    def test_step_edge_smoothed_with_flat_guide(self):
        v = np.where(np.arange(16)[None, :] < 8, 10.0, 20.0).repeat(16, axis=0)
        out = wls_smooth(dmap(v), np.full(v.shape, 128.0), WlsParams(solver="exact")).values
        assert np.abs(np.diff(out, axis=1)).max() < 10.0 - 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_solver_matches_dense_oracle(self, seed):
        dm, guide = block_instance(seed)
        p = WlsParams(solver="exact")
        out = wls_smooth(dm, guide, p)
        f = np.nan_to_num(dm.values)
        ref = dense_wls(f, dm.valid, guide, p.lam, p.sigma_color)
        assert np.abs(out.values - ref).max() < 1e-3

    @pytest.mark.parametrize("lam,sigma", [(100.0, 1.5), (8000.0, 10.0), (5.0, 40.0)])
    def test_exact_solver_other_parameters(self, lam, sigma):
        dm, guide = block_instance(11)
        out = wls_smooth(dm, guide, WlsParams(lam=lam, sigma_color=sigma, solver="exact"))
        ref = dense_wls(np.nan_to_num(dm.values), dm.valid, guide, lam, sigma)
        assert np.abs(out.values - ref).max() < 1e-3

    @pytest.mark.xfail(strict=True, reason="alternating 1D passes only approximate the 2D minimizer")
    def test_fast_solver_against_dense_oracle(self):
        dm, guide = block_instance(0)
        p = WlsParams(solver="fgs")
        out = wls_smooth(dm, guide, p)
        ref = dense_wls(np.nan_to_num(dm.values), dm.valid, guide, p.lam, p.sigma_color)
        assert np.abs(out.values - ref).max() < 1e-3

    def test_row_pass_is_exact_1d_minimizer(self):
        rng = np.random.default_rng(4)
        u = rng.uniform(0, 30, (3, 9))
        data = rng.random((3, 9)) > 0.3
        data[:, 0] = True
        w = rng.uniform(0.01, 1, (3, 8))
        out, filled = _row_pass(u, data, w, 5.0)
        assert filled.all()
        for i in range(3):
            A = np.diag(data[i].astype(float))
            for j in range(8):
                A[j, j] += 5 * w[i, j]
                A[j + 1, j + 1] += 5 * w[i, j]
                A[j, j + 1] -= 5 * w[i, j]
                A[j + 1, j] -= 5 * w[i, j]
            ref = np.linalg.solve(A, data[i] * u[i])
            np.testing.assert_allclose(out[i], ref, rtol=1e-10, atol=1e-10)

    @given(
        arrays(np.float64, st.tuples(st.integers(2, 10), st.integers(2, 10)), elements=st.floats(0, 63)),
        st.integers(0, 2**31),
        st.sampled_from(["fgs", "exact"]),
        st.floats(0.0, 1e4),
    )
    @settings(max_examples=30)
    def test_range_safety_and_full_validity(self, values, seed, solver, lam):
        rng = np.random.default_rng(seed)
        valid = rng.random(values.shape) > 0.5
        valid.flat[rng.integers(valid.size)] = True
        guide = rng.integers(0, 256, values.shape)
        out = wls_smooth(dmap(values, valid), guide, WlsParams(lam=lam, solver=solver))
        assert out.valid.all() and np.isfinite(out.values).all()
        lo, hi = values[valid].min(), values[valid].max()
        assert out.values.min() >= lo and out.values.max() <= hi

    def test_all_invalid_rejected(self):
        v = np.full((4, 4), np.nan)
        with pytest.raises(NoValidPixelsError):
            wls_smooth(dmap(v), np.zeros((4, 4)))

    def test_guide_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            wls_smooth(dmap(np.ones((4, 4))), np.zeros((4, 5)))

    def test_params_validation(self):
        with pytest.raises(ContractViolation):
            WlsParams(lam=-1)
        with pytest.raises(ContractViolation):
            WlsParams(sigma_color=0)
        with pytest.raises(ContractViolation):
            WlsParams(iterations=0)
        with pytest.raises(ContractViolation):
            WlsParams(solver="multigrid")


class TestHelpers:
    def test_lambda_schedule(self):
        sched = lambda_schedule(8000.0, 3)
        assert len(sched) == 3
        assert sched[0] == pytest.approx(1.5 * 8000 * 16 / 63)
        assert sched[0] / sched[1] == pytest.approx(4.0) and sched[1] / sched[2] == pytest.approx(4.0)

    def test_guide_weights(self):
        g = np.array([[0.0, 0.0, 3.0], [0.0, 1000.0, 3.0]])
        wx, wy = guide_weights(g, 1.5)
        assert wx.shape == (2, 2) and wy.shape == (1, 3)
        assert wx[0, 0] == 1.0
        assert wx[0, 1] == pytest.approx(np.exp(-2.0))
        assert wy[0, 1] == 1e-12  # floored

    def test_operator_matches_dense_matrix(self):
        rng = np.random.default_rng(2)
        mask = rng.random((4, 5)) > 0.5
        g = rng.integers(0, 256, (4, 5)).astype(float)
        wx, wy = guide_weights(g, 30.0)
        A = wls_operator(mask, wx, wy, 3.0)
        u = rng.normal(size=(4, 5))
        # the dense oracle solves A x = M f; compare A applied to its solution
        f = rng.normal(size=(4, 5))
        mask[0, 0] = True
        x = dense_wls(f, mask, g, 3.0, 30.0)
        np.testing.assert_allclose(wls_operator(mask, wx, wy, 3.0)(x), np.where(mask, f, 0.0), atol=1e-9)
        assert A(u).shape == u.shape
