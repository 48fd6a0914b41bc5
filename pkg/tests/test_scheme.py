import math

import numpy as np
import pytest

from regimeput.errors import DimensionMismatch, SingularPivot
from regimeput.model import GridSpec
from regimeput.scheme import (
    SchemeCoefficients,
    TridiagonalSystem,
    assemble_derivative_system,
    assemble_value_system,
    compact_boundary_residual,
    derivative_matrix,
    fast_solve,
    thomas_solve,
    value_matrix,
)

from conftest import grid_for


def random_dd_system(rng, n):
    sub = np.zeros(n)
    sup = np.zeros(n)
    sub[1:] = rng.uniform(-1.0, 1.0, n - 1)
    sup[:-1] = rng.uniform(-1.0, 1.0, n - 1)
    diag = rng.uniform(2.5, 4.0, n) * rng.choice([-1.0, 1.0], n)
    rhs = rng.uniform(-5.0, 5.0, n)
    return TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=rhs)


class TestThomasSolve:
    def test_identity_system(self):
        rhs = np.array([3.0, -1.0, 2.0])
        system = TridiagonalSystem(
            sub=np.zeros(3), diag=np.ones(3), sup=np.zeros(3), rhs=rhs.copy()
        )
        assert np.array_equal(thomas_solve(system), rhs)

    def test_three_by_three_against_dense_oracle(self):
        system = TridiagonalSystem(
            sub=np.array([0.0, 1.0, 1.0]),
            diag=np.array([2.0, 2.0, 2.0]),
            sup=np.array([1.0, 1.0, 0.0]),
            rhs=np.array([1.0, 0.0, 1.0]),
        )
        expected = np.linalg.solve(system.dense(), system.rhs)
        assert np.allclose(expected, [1.0, -1.0, 1.0], atol=1e-14)
        assert np.allclose(thomas_solve(system), expected, atol=1e-12)
        # same matrix with a constant right side has the symmetric solution
        system.rhs = np.ones(3)
        assert np.allclose(thomas_solve(system), [0.5, 0.0, 0.5], atol=1e-14)

    def test_random_diagonally_dominant_vs_dense(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 200))
            system = random_dd_system(rng, n)
            expected = np.linalg.solve(system.dense(), system.rhs)
            got = thomas_solve(system)
            assert np.max(np.abs(got - expected)) <= 1e-10 * max(
                1.0, np.max(np.abs(expected))
            )

    def test_fast_solve_matches_reference(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(3, 400))
            system = random_dd_system(rng, n)
            assert np.allclose(
                fast_solve(system), thomas_solve(system), rtol=1e-12, atol=1e-12
            )

    def test_zero_pivot_raises(self):
        system = TridiagonalSystem(
            sub=np.array([0.0, 1.0]),
            diag=np.array([0.0, 1.0]),
            sup=np.array([1.0, 0.0]),
            rhs=np.ones(2),
        )
        with pytest.raises(SingularPivot):
            thomas_solve(system)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            TridiagonalSystem(
                sub=np.zeros(3), diag=np.zeros(4), sup=np.zeros(4), rhs=np.zeros(4)
            )


def dense_value_assembly(u_n, w_n, y_n, w_g, y_g, cu, cw, sigma, rq, omega, grid, K):
    """Literal per-row transcription of the value-system equations."""
    h, k, M = grid.h, grid.k, grid.M
    n = M + 1
    a = np.zeros((n, n))
    rhs = np.zeros(n)
    s2 = sigma * sigma
    # anchored boundary row
    a[0, 0] = (7.0 + h) / (4.0 * k) + 5.0 * s2 / (4.0 * h * h) \
        + 5.0 * s2 / (4.0 * h) + (7.0 + h) * rq / 8.0
    a[0, 1] = 3.0 / (4.0 * k) - 5.0 * s2 / (4.0 * h * h) + 3.0 * rq / 8.0
    w2 = [w_g[i] + w_n[i] for i in range(n)]
    y2 = [y_g[i] + y_n[i] for i in range(n)]
    rhs[0] = (
        (7.0 + h) / (4.0 * k) * u_n[0]
        + 3.0 / (4.0 * k) * u_n[1]
        - 5.0 * s2 / (4.0 * h * h) * (u_n[0] - u_n[1])
        - 5.0 * s2 / (4.0 * h) * u_n[0]
        + 5.0 * s2 / (2.0 * h) * K
        + h * rq / 4.0 * K
        - rq / 8.0 * ((7.0 + h) * u_n[0] + 3.0 * u_n[1])
        + h / (6.0 * k) * (w_g[1] - w_n[1])
        + h * rq / 12.0 * w2[1]
        + omega / 8.0 * (4.0 * w2[0] + 3.0 * w2[1] + 3.0 * w2[2])
        - h * omega / 24.0 * (14.0 * y2[1] + 3.0 * y2[2])
        + (7.0 * cu[0] + 3.0 * cu[1]) / 8.0
        + h * (3.0 * cw[0] - 2.0 * cw[1]) / 24.0
    )
    for i in range(1, M):
        a[i, i - 1] = 1.0 / (12.0 * k) - s2 / (4.0 * h * h) + rq / 24.0
        a[i, i] = 10.0 / (12.0 * k) + s2 / (2.0 * h * h) + 10.0 * rq / 24.0
        a[i, i + 1] = a[i, i - 1]
        mass_n = u_n[i - 1] + 10.0 * u_n[i] + u_n[i + 1]
        rhs[i] = (
            mass_n / (12.0 * k)
            + s2 / (4.0 * h * h) * (u_n[i - 1] - 2.0 * u_n[i] + u_n[i + 1])
            + omega / 24.0 * (w2[i - 1] + 10.0 * w2[i] + w2[i + 1])
            - rq / 24.0 * mass_n
            + (cu[i - 1] + 10.0 * cu[i] + cu[i + 1]) / 24.0
        )
    a[M, M] = 1.0
    rhs[M] = 0.0
    return a, rhs


class TestAssembly:
    def setup_method(self):
        self.grid = grid_for(0.1)
        self.rng = np.random.default_rng(3)
        self.sigma, self.r, self.q_mm = 0.3, 0.05, -9.0
        self.coeffs = SchemeCoefficients.for_regime(
            self.sigma, self.r, self.q_mm, self.grid
        )

    def random_fields(self):
        n = self.grid.M + 1
        return [self.rng.standard_normal(n) for _ in range(7)]

    def test_value_system_matches_dense_transcription(self):
        u_n, w_n, y_n, w_g, y_g, cu, cw = self.random_fields()
        omega = -0.22
        system = assemble_value_system(
            u_n, w_n, y_n, w_g, y_g, cu, cw, self.coeffs, omega, self.grid, 9.0
        )
        rq = self.r - self.q_mm
        a, rhs = dense_value_assembly(
            u_n, w_n, y_n, w_g, y_g, cu, cw, self.sigma, rq, omega, self.grid, 9.0
        )
        assert np.allclose(system.dense(), a, rtol=1e-13, atol=1e-10)
        assert np.allclose(system.rhs, rhs, rtol=1e-13, atol=1e-10)

    def test_derivative_system_matches_dense_transcription(self):
        f_n, g_sum, cf, *_ = self.random_fields()
        omega = 0.15
        system = assemble_derivative_system(
            f_n, g_sum, cf, self.coeffs, omega, self.grid, -7.5
        )
        h, k, M = self.grid.h, self.grid.k, self.grid.M
        s2 = self.sigma**2
        rq = self.r - self.q_mm
        rhs = np.zeros(M + 1)
        rhs[0] = -7.5
        for i in range(1, M):
            mass_n = f_n[i - 1] + 10.0 * f_n[i] + f_n[i + 1]
            rhs[i] = (
                mass_n / (12.0 * k)
                + s2 / (4.0 * h * h) * (f_n[i - 1] - 2.0 * f_n[i] + f_n[i + 1])
                + omega / (2.0 * h * h)
                * (g_sum[i - 1] - 2.0 * g_sum[i] + g_sum[i + 1])
                - rq / 24.0 * mass_n
                + (cf[i - 1] + 10.0 * cf[i] + cf[i + 1]) / 24.0
            )
        assert np.allclose(system.rhs, rhs, rtol=1e-13, atol=1e-10)
        assert system.diag[0] == 1.0 and system.diag[-1] == 1.0

    def test_planted_solution_recovered(self):
        u_n, w_n, y_n, w_g, y_g, cu, cw = self.random_fields()
        system = assemble_value_system(
            u_n, w_n, y_n, w_g, y_g, cu, cw, self.coeffs, -0.1, self.grid, 9.0
        )
        planted = self.rng.standard_normal(self.grid.M + 1)
        system.rhs = system.dense() @ planted
        got = thomas_solve(system)
        assert np.max(np.abs(got - planted)) < 1e-10 * max(1.0, np.max(np.abs(planted)))

    def test_systems_are_deterministic(self):
        u_n, w_n, y_n, w_g, y_g, cu, cw = self.random_fields()
        args = (u_n, w_n, y_n, w_g, y_g, cu, cw, self.coeffs, -0.1, self.grid, 9.0)
        s1 = assemble_value_system(*args)
        s2 = assemble_value_system(*args)
        assert np.array_equal(s1.diag, s2.diag)
        assert np.array_equal(s1.rhs, s2.rhs)

    def test_matrices_constant_across_time_and_omega(self):
        # the matrices carry no drift dependence: assembling with different
        # omega changes only the right-hand side
        u_n, w_n, y_n, w_g, y_g, cu, cw = self.random_fields()
        s1 = assemble_value_system(
            u_n, w_n, y_n, w_g, y_g, cu, cw, self.coeffs, -0.1, self.grid, 9.0
        )
        s2 = assemble_value_system(
            u_n, w_n, y_n, w_g, y_g, cu, cw, self.coeffs, 5.0, self.grid, 9.0
        )
        assert np.array_equal(s1.diag, s2.diag)
        assert np.array_equal(s1.sub, s2.sub)
        assert np.array_equal(s1.sup, s2.sup)

    def test_dimension_mismatch_rejected(self):
        n = self.grid.M + 1
        with pytest.raises(DimensionMismatch):
            assemble_derivative_system(
                np.zeros(n - 1), np.zeros(n), np.zeros(n),
                self.coeffs, 0.0, self.grid, 0.0,
            )

    def test_first_step_rhs_contains_only_strike_sources(self):
        # zero fields and coupling with a stationary boundary leave only the
        # strike-driven terms in the boundary row
        n = self.grid.M + 1
        zeros = np.zeros(n)
        omega = self.r - 0.5 * self.sigma**2
        system = assemble_value_system(
            zeros, zeros, zeros, zeros, zeros, zeros, zeros,
            self.coeffs, omega, self.grid, 9.0,
        )
        h = self.grid.h
        expected0 = (
            5.0 * self.sigma**2 / (2.0 * h) * 9.0
            + h * (self.r - self.q_mm) / 4.0 * 9.0
        )
        assert system.rhs[0] == pytest.approx(expected0, rel=1e-14)
        assert np.allclose(system.rhs[1:], 0.0)


def steady_state_fields(grid, r, sigma, strike):
    """Exact stationary solution of the single-regime system.

    The perpetual exercise boundary and its exponential value profile
    satisfy the transformed equations and both pasting identities exactly,
    with a stationary boundary, so every time term vanishes and the row
    residuals isolate the spatial truncation error.
    """
    beta = -2.0 * r / sigma**2
    s_star = 2.0 * r * strike / (sigma**2 + 2.0 * r)
    x = grid.nodes()
    base = (strike - s_star) * np.exp(beta * x)
    return s_star, base, beta * base, beta**2 * base, beta**3 * base


class TestSchemeOrder:
    @pytest.mark.parametrize("sigma,r", [(0.3, 0.05), (0.8, 0.10)])
    def test_boundary_row_is_fourth_order_on_steady_state(self, sigma, r):
        residuals = []
        for M in (30, 60, 120):
            grid = GridSpec(x_max=3.0, M=M, N=int(1.0 / (3.0 / M) ** 2), expiry=1.0)
            s_star, u, w, y, z = steady_state_fields(grid, r, sigma, 9.0)
            coeffs = SchemeCoefficients.for_regime(sigma, r, 0.0, grid)
            omega = r - 0.5 * sigma**2
            zeros = np.zeros(grid.M + 1)
            system = assemble_value_system(
                u, w, y, w, y, zeros, zeros, coeffs, omega, grid, 9.0
            )
            residual = system.dense() @ u - system.rhs
            residuals.append(abs(residual[0]))
        assert residuals[0] / residuals[1] > 12.0
        assert residuals[1] / residuals[2] > 12.0

    def test_interior_rows_fourth_order_on_steady_state(self):
        sigma, r = 0.3, 0.05
        residuals = []
        for M in (30, 60, 120):
            grid = GridSpec(x_max=3.0, M=M, N=int(1.0 / (3.0 / M) ** 2), expiry=1.0)
            _, u, w, y, z = steady_state_fields(grid, r, sigma, 9.0)
            coeffs = SchemeCoefficients.for_regime(sigma, r, 0.0, grid)
            omega = r - 0.5 * sigma**2
            zeros = np.zeros(grid.M + 1)
            system = assemble_value_system(
                u, w, y, w, y, zeros, zeros, coeffs, omega, grid, 9.0
            )
            residual = system.dense() @ u - system.rhs
            residuals.append(np.max(np.abs(residual[1:-1])))
        assert residuals[0] / residuals[1] > 12.0
        assert residuals[1] / residuals[2] > 12.0

    def test_derivative_rows_fourth_order_on_steady_state(self):
        sigma, r = 0.3, 0.05
        residuals = []
        for M in (30, 60, 120):
            grid = GridSpec(x_max=3.0, M=M, N=int(1.0 / (3.0 / M) ** 2), expiry=1.0)
            s_star, u, w, y, z = steady_state_fields(grid, r, sigma, 9.0)
            coeffs = SchemeCoefficients.for_regime(sigma, r, 0.0, grid)
            omega = r - 0.5 * sigma**2
            zeros = np.zeros(grid.M + 1)
            system = assemble_derivative_system(
                w, 2.0 * u, zeros, coeffs, omega, grid, -s_star
            )
            residual = system.dense() @ w - system.rhs
            residuals.append(np.max(np.abs(residual[1:-1])))
        assert residuals[0] / residuals[1] > 12.0

    def test_compact_mass_identity_exact_on_quartics(self):
        # the (1,10,1)/12 mass against the plain second difference
        for M in (20, 40):
            h = 3.0 / M
            x = np.arange(M + 1) * h
            f = x**4
            d2 = 12.0 * x**2
            mass = (d2[:-2] + 10.0 * d2[1:-1] + d2[2:]) / 12.0
            lap = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / h**2
            assert np.max(np.abs(mass - lap)) < 1e-8

    def test_compact_mass_identity_fourth_order(self):
        errs = []
        for M in (30, 60):
            h = 3.0 / M
            x = np.arange(M + 1) * h
            f = np.sin(x)
            d2 = -np.sin(x)
            mass = (d2[:-2] + 10.0 * d2[1:-1] + d2[2:]) / 12.0
            lap = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / h**2
            errs.append(np.max(np.abs(mass - lap)))
        assert errs[0] / errs[1] >= 14.0


class TestCompactBoundaryResidual:
    def test_cubic_polynomials_are_exact(self):
        p = np.polynomial.Polynomial([1.0, -2.0, 0.5, 0.25])
        res = compact_boundary_residual(
            p, p.deriv(1), p.deriv(2), p.deriv(3), 0.4, 0.1
        )
        assert abs(res) < 1e-10

    def test_exponential_halving_ratio(self):
        res = [
            abs(compact_boundary_residual(
                np.exp, np.exp, np.exp, np.exp, 0.0, h
            ))
            for h in (0.1, 0.05)
        ]
        assert res[0] / res[1] >= 14.0

    def test_sine_small_residual(self):
        res = compact_boundary_residual(
            np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), 0.3, 0.05
        )
        assert abs(res) < 1e-6
