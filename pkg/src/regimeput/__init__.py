"""American put pricing under Markov regime switching.

Front-fixing log transformation, fourth-order compact finite differences on
the coupled value/delta/gamma/speed system, Hermite inter-regime coupling,
and Gauss-Seidel or Newton time stepping.
"""

from .model import (
    BoundaryHistory,
    GeneratorMatrix,
    GridSpec,
    RegimeModel,
    RegimeState,
    exercise_region_values,
    initial_state,
    omega,
    validate_generator,
)
from .solver import (
    SolveResult,
    SolverConfig,
    gs_time_step,
    newton_time_step,
    price_at_asset,
    solve,
)

__all__ = [
    "BoundaryHistory",
    "GeneratorMatrix",
    "GridSpec",
    "RegimeModel",
    "RegimeState",
    "SolveResult",
    "SolverConfig",
    "exercise_region_values",
    "gs_time_step",
    "initial_state",
    "newton_time_step",
    "omega",
    "price_at_asset",
    "solve",
    "validate_generator",
]

__version__ = "0.1.0"
