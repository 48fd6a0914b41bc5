"""Shared fixtures; the expensive production-resolution solves are
session-scoped so the acceptance criteria can share them."""

import numpy as np
import pytest

from regimeput.cli import fixture_run_config
from regimeput.model import GridSpec, RegimeModel, validate_generator
from regimeput.solver import SolverConfig, solve


def two_regime_model() -> RegimeModel:
    return RegimeModel(
        rates=np.array([0.10, 0.05]),
        vols=np.array([0.80, 0.30]),
        generator=validate_generator([[-6.0, 6.0], [9.0, -9.0]]),
        strike=9.0,
        expiry=1.0,
    )


def single_regime_model(r=0.05, sigma=0.30, strike=9.0) -> RegimeModel:
    return RegimeModel(
        rates=np.array([r]),
        vols=np.array([sigma]),
        generator=validate_generator([[0.0]]),
        strike=strike,
        expiry=1.0,
    )


def grid_for(h: float, x_max: float = 3.0, expiry: float = 1.0) -> GridSpec:
    return GridSpec.from_steps(x_max=x_max, h=h, k=h * h, expiry=expiry)


def solve_fixture(name, h, method="gs", interpolation="quintic"):
    config = fixture_run_config(name, h=h, method=method, interpolation=interpolation)
    return solve(config.model, config.solver)


@pytest.fixture(scope="session")
def ex1_gs_quintic():
    """Two-regime benchmark at production resolution, GS + quintic."""
    return solve_fixture("two-regime-ex1", 0.01)


@pytest.fixture(scope="session")
def ex1_newton_cubic():
    return solve_fixture("two-regime-ex1", 0.01, method="newton", interpolation="cubic")


@pytest.fixture(scope="session")
def ex1_newton_quintic():
    return solve_fixture("two-regime-ex1", 0.01, method="newton")


@pytest.fixture(scope="session")
def ex2_gs_quintic():
    return solve_fixture("no-jump-ex2", 0.01)


@pytest.fixture(scope="session")
def ex3_gs_quintic():
    return solve_fixture("two-regime-ex3", 0.01)


@pytest.fixture(scope="session")
def ex3_newton_quintic():
    return solve_fixture("two-regime-ex3", 0.01, method="newton")


@pytest.fixture(scope="session")
def ex4_gs_quintic():
    return solve_fixture("four-regime", 0.01)


@pytest.fixture(scope="session")
def ex8_gs_quintic():
    return solve_fixture("eight-regime", 0.05)


@pytest.fixture(scope="session")
def ex16_gs_quintic():
    return solve_fixture("sixteen-regime", 0.05)


@pytest.fixture(scope="session")
def ex1_refinement_results():
    """Solves of the two-regime benchmark over a halving ladder."""
    return [
        solve_fixture("two-regime-ex1", h) for h in (0.1, 0.05, 0.025, 0.0125)
    ]


@pytest.fixture(scope="session")
def ex1_gs_medium():
    """Two-regime benchmark at h = 0.05 for cheaper structural checks."""
    return solve_fixture("two-regime-ex1", 0.05)
