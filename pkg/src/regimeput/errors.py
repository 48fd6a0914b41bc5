"""Exception types raised across the package."""


class PricerError(Exception):
    """Base class for all errors raised by this package."""


class NegativeOffDiagonal(PricerError, ValueError):
    """A generator matrix has a negative off-diagonal transition rate."""


class RowSumViolation(PricerError, ValueError):
    """A generator matrix row does not sum to zero within tolerance."""


class NonpositiveBoundary(PricerError, ValueError):
    """An exercise-boundary value is zero or negative."""


class NonpositiveAsset(PricerError, ValueError):
    """A queried asset price is zero or negative."""


class RegimeOutOfRange(PricerError, IndexError):
    """A regime index is outside [0, I)."""


class GridTooSmall(PricerError, ValueError):
    """The spatial grid has too few intervals for the requested stencil."""


class OutOfBracket(PricerError, ValueError):
    """An interpolation point lies outside its bracketing interval."""


class DimensionMismatch(PricerError, ValueError):
    """Array lengths are inconsistent with the grid."""


class SingularPivot(PricerError, ArithmeticError):
    """Tridiagonal elimination hit a zero pivot."""


class InsufficientHistory(PricerError, ValueError):
    """Not enough stored time levels for the requested difference formula."""


class GridMismatch(PricerError, ValueError):
    """Two grids compared in a refinement study are not a 2x refinement pair."""


class NonpositiveError(PricerError, ValueError):
    """A convergence-rate computation received a non-positive error value."""


class NonpositiveMu(PricerError, ValueError):
    """The diffusion number of the amplification analysis must be positive."""


class NoConvergence(PricerError, RuntimeError):
    """The per-step nonlinear iteration exceeded its iteration budget.

    Carries the offending time step and the last residuals so callers can
    diagnose whether the tolerance or the budget is the problem.
    """

    def __init__(self, step, iterations, boundary_residual, value_residual):
        self.step = step
        self.iterations = iterations
        self.boundary_residual = boundary_residual
        self.value_residual = value_residual
        super().__init__(
            f"no convergence at step {step} after {iterations} iterations "
            f"(boundary residual {boundary_residual:.3e}, "
            f"value residual {value_residual:.3e})"
        )


class SolveFailure(PricerError, RuntimeError):
    """A full-horizon solve failed; wraps the failing step index."""

    def __init__(self, step, cause):
        self.step = step
        self.cause = cause
        super().__init__(f"solve failed at step {step}: {cause}")


class ConfigParse(PricerError, ValueError):
    """A run-configuration file is malformed; message points at the field."""


class UnknownTable(PricerError, KeyError):
    """A reproduction request named a reference table that is not embedded."""
