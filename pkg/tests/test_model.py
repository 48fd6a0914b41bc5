import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regimeput.errors import (
    NegativeOffDiagonal,
    NonpositiveBoundary,
    RowSumViolation,
)
from regimeput.model import (
    GridSpec,
    exercise_region_values,
    initial_state,
    omega,
    validate_generator,
)

from conftest import grid_for, single_regime_model, two_regime_model


class TestValidateGenerator:
    def test_two_regime_benchmark_matrix(self):
        gen = validate_generator([[-6.0, 6.0], [9.0, -9.0]])
        assert gen.num_regimes == 2
        assert gen.off_diagonal_row_sum(0) == 6.0

    def test_zero_matrix_is_valid(self):
        gen = validate_generator([[0.0, 0.0], [0.0, 0.0]])
        assert gen.num_regimes == 2

    def test_negative_off_diagonal_rejected(self):
        with pytest.raises(NegativeOffDiagonal):
            validate_generator([[-1.0, -1.0], [2.0, -2.0]])

    def test_row_sum_violation_rejected(self):
        with pytest.raises(RowSumViolation):
            validate_generator([[-1.0, 1.5], [2.0, -2.0]])

    def test_row_sum_tolerance_allows_rounded_thirds(self):
        third = 0.3333333333333333
        row = [-3 * third, third, third, third]
        rows = [row[-i:] + row[:-i] for i in range(4)]
        validate_generator(rows)

    @given(
        st.integers(min_value=1, max_value=5),
        st.integers(min_value=0, max_value=10**6),
    )
    def test_random_valid_generators_accepted(self, n, seed):
        rng = np.random.default_rng(seed)
        q = rng.uniform(0.0, 5.0, size=(n, n))
        np.fill_diagonal(q, 0.0)
        q[np.arange(n), np.arange(n)] = -q.sum(axis=1)
        validate_generator(q)

    @given(
        st.integers(min_value=2, max_value=5),
        st.integers(min_value=0, max_value=10**6),
    )
    def test_injected_sign_violation_rejected(self, n, seed):
        rng = np.random.default_rng(seed)
        q = rng.uniform(0.1, 5.0, size=(n, n))
        np.fill_diagonal(q, 0.0)
        q[np.arange(n), np.arange(n)] = -q.sum(axis=1)
        i, j = rng.integers(0, n, size=2)
        if i == j:
            j = (j + 1) % n
        q[i, j] = -q[i, j]
        with pytest.raises((NegativeOffDiagonal, RowSumViolation)):
            validate_generator(q)


class TestOmega:
    def test_stationary_boundary_high_vol(self):
        assert omega(9.0, 9.0, 0.01, 0.10, 0.80) == pytest.approx(-0.22, abs=1e-14)

    def test_stationary_boundary_low_vol(self):
        assert omega(9.0, 9.0, 0.01, 0.05, 0.30) == pytest.approx(0.005, abs=1e-14)

    def test_moving_boundary(self):
        # direct arithmetic evaluation of the definition
        expected = 2.0 * (8.9 - 9.0) / (0.01 * (8.9 + 9.0)) + 0.10 - 0.5 * 0.80**2
        assert omega(8.9, 9.0, 0.01, 0.10, 0.80) == pytest.approx(expected, rel=1e-15)

    def test_nonpositive_boundary_rejected(self):
        with pytest.raises(NonpositiveBoundary):
            omega(0.0, 9.0, 0.01, 0.1, 0.8)
        with pytest.raises(NonpositiveBoundary):
            omega(9.0, -1.0, 0.01, 0.1, 0.8)

    @given(
        st.floats(min_value=0.01, max_value=0.2),
        st.floats(min_value=0.05, max_value=1.5),
    )
    def test_stationary_reduces_to_drift(self, r, sigma):
        assert omega(7.0, 7.0, 1e-4, r, sigma) == pytest.approx(
            r - 0.5 * sigma**2, abs=1e-14
        )


class TestExerciseRegion:
    def test_boundary_point(self):
        assert exercise_region_values(9.0, 0.0, 9.0) == (0.0, -9.0, -9.0, -9.0)

    def test_half_moneyness(self):
        u, w, y, z = exercise_region_values(8.0, -math.log(2.0), 9.0)
        assert u == pytest.approx(5.0, abs=1e-12)
        assert w == pytest.approx(-4.0, abs=1e-12)
        assert y == w and z == w

    def test_closed_form(self):
        u, w, y, z = exercise_region_values(8.5, -0.3, 9.0)
        assert u == pytest.approx(9.0 - 8.5 * math.exp(-0.3), rel=1e-15)
        assert w == pytest.approx(-8.5 * math.exp(-0.3), rel=1e-15)

    @given(
        st.floats(min_value=-5.0, max_value=0.0),
        st.floats(min_value=0.5, max_value=20.0),
    )
    def test_payoff_identity(self, x, s_f):
        u, w, y, z = exercise_region_values(s_f, x, 9.0)
        assert u + s_f * math.exp(x) == pytest.approx(9.0, rel=1e-12)
        assert w == y == z


class TestGridSpec:
    def test_steps_are_exact_ratios(self):
        grid = grid_for(0.01)
        assert grid.h == 3.0 / grid.M
        assert grid.k == 1.0 / grid.N
        assert grid.M == 300 and grid.N == 10000

    def test_rejects_tiny_grids(self):
        with pytest.raises(ValueError):
            GridSpec(x_max=3.0, M=3, N=10, expiry=1.0)
        with pytest.raises(ValueError):
            GridSpec(x_max=3.0, M=10, N=1, expiry=1.0)

    def test_rejects_nondividing_steps(self):
        with pytest.raises(ValueError):
            GridSpec.from_steps(x_max=3.0, h=0.07, k=0.01, expiry=1.0)


class TestInitialState:
    def test_zero_fields_and_strike_boundary(self):
        model = two_regime_model()
        grid = grid_for(0.1)
        states = initial_state(model, grid)
        assert len(states) == 2
        for st_ in states:
            assert not st_.u.any() and not st_.w.any()
            assert not st_.y.any() and not st_.z.any()
            assert st_.s_f == 9.0 and st_.s_f_prev == 9.0

    def test_regime_count_matches_model(self):
        model = single_regime_model()
        assert len(initial_state(model, grid_for(0.1))) == 1
