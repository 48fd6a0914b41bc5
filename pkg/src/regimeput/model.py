"""Market model, grid, and the transformed-coordinate closed forms.

The asset follows a regime-switching lognormal diffusion: a continuous-time
Markov chain with generator ``Q`` selects the active pair ``(r_m, sigma_m)``.
For an American put each regime carries its own optimal exercise boundary
``s_f(m)(tau)``.  Working in the log-moneyness coordinate
``x = ln(S / s_f(m)(tau))`` pins every boundary to ``x = 0`` and turns the
problem into a coupled system on a fixed interval ``[0, x_max]`` for the
transformed price ``u`` and its first three space derivatives ``w`` (delta),
``y`` (gamma) and ``z`` (speed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DimensionMismatch,
    NegativeOffDiagonal,
    NonpositiveBoundary,
    RowSumViolation,
)

ROW_SUM_TOL = 1e-12

Array = NDArray[np.float64]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated generator (rate) matrix of the regime Markov chain."""

    entries: Array
    num_regimes: int

    def off_diagonal_row_sum(self, m: int) -> float:
        """Total jump intensity out of regime ``m`` (equals ``-q_mm``)."""
        row = self.entries[m]
        return float(row.sum() - row[m])


def validate_generator(entries) -> GeneratorMatrix:
    """Check generator-matrix structure and wrap the entries.

    Off-diagonal rates must be nonnegative and each row must sum to zero
    within an absolute tolerance of 1e-12 (covers rate matrices written with
    finite decimals, e.g. 1/3 rounded in a config file).
    """
    q = np.asarray(entries, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DimensionMismatch(f"generator must be square, got shape {q.shape}")
    n = q.shape[0]
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0.0):
        m, l = np.argwhere(off < 0.0)[0]
        raise NegativeOffDiagonal(
            f"off-diagonal rate q[{m},{l}] = {q[m, l]} is negative"
        )
    row_sums = q.sum(axis=1)
    bad = np.abs(row_sums) > ROW_SUM_TOL
    if np.any(bad):
        m = int(np.argmax(bad))
        raise RowSumViolation(
            f"generator row {m} sums to {row_sums[m]:.3e}, expected 0 within "
            f"{ROW_SUM_TOL:.0e}"
        )
    return GeneratorMatrix(entries=q, num_regimes=n)


@dataclass(frozen=True)
class RegimeModel:
    """Market parameters of the regime-switching American put."""

    rates: Array
    vols: Array
    generator: GeneratorMatrix
    strike: float
    expiry: float

    def __post_init__(self):
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))
        object.__setattr__(self, "vols", np.asarray(self.vols, dtype=float))
        n = self.generator.num_regimes
        if self.rates.shape != (n,) or self.vols.shape != (n,):
            raise DimensionMismatch(
                f"rates/vols must have length {n}, got "
                f"{self.rates.shape} and {self.vols.shape}"
            )
        if np.any(self.vols <= 0.0):
            raise ValueError("all volatilities must be positive")
        if np.any(self.rates < 0.0):
            raise ValueError("risk-free rates must be nonnegative")
        if not self.strike > 0.0:
            raise ValueError("strike must be positive")
        if not self.expiry > 0.0:
            raise ValueError("expiry must be positive")

    @property
    def num_regimes(self) -> int:
        return self.generator.num_regimes


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh on ``[0, x_max] x [0, T]``.

    ``h`` and ``k`` are derived from the integer counts so that
    ``h = x_max / M`` and ``k = T / N`` hold exactly.
    """

    x_max: float
    M: int
    N: int
    expiry: float
    h: float = field(init=False)
    k: float = field(init=False)

    def __post_init__(self):
        if self.M < 4:
            raise ValueError("M must be at least 4 (boundary stencil uses nodes 0..2)")
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not self.x_max > 0.0:
            raise ValueError("x_max must be positive")
        object.__setattr__(self, "h", self.x_max / self.M)
        object.__setattr__(self, "k", self.expiry / self.N)

    @classmethod
    def from_steps(cls, x_max: float, h: float, k: float, expiry: float) -> "GridSpec":
        """Build a grid from target step sizes, rounding to integer counts."""
        M = int(round(x_max / h))
        N = int(round(expiry / k))
        grid = cls(x_max=x_max, M=M, N=N, expiry=expiry)
        if abs(grid.h - h) > 1e-9 * max(1.0, abs(h)):
            raise ValueError(f"h = {h} does not divide x_max = {x_max} evenly")
        if abs(grid.k - k) > 1e-9 * max(1.0, abs(k)):
            raise ValueError(f"k = {k} does not divide expiry = {expiry} evenly")
        return grid

    def nodes(self) -> Array:
        return np.arange(self.M + 1) * self.h


@dataclass
class RegimeState:
    """Per-regime solution arrays on the fixed interval plus the boundary.

    Owned by a single solver instance; mutated in place during iteration.
    After every completed time step ``u[0] = K - s_f``,
    ``w[0] = y[0] = z[0] = -s_f`` and all four arrays vanish at the far node.
    """

    u: Array
    w: Array
    y: Array
    z: Array
    s_f: float
    s_f_prev: float

    def copy(self) -> "RegimeState":
        return RegimeState(
            u=self.u.copy(),
            w=self.w.copy(),
            y=self.y.copy(),
            z=self.z.copy(),
            s_f=self.s_f,
            s_f_prev=self.s_f_prev,
        )


@dataclass
class BoundaryHistory:
    """Exercise-boundary values per regime at every time level."""

    values: Array  # shape (I, N+1)

    @property
    def num_levels(self) -> int:
        return self.values.shape[1]


def omega(s_f_new: float, s_f_old: float, k: float, r_m: float, sigma_m: float) -> float:
    """Drift coefficient of the transformed system at the half time level.

    Combines the logarithmic boundary velocity (midpoint discretization over
    one time step) with the lognormal drift ``r - sigma^2 / 2``.
    """
    if s_f_new <= 0.0 or s_f_old <= 0.0:
        raise NonpositiveBoundary(
            f"boundary values must be positive, got {s_f_new} and {s_f_old}"
        )
    if k <= 0.0:
        raise ValueError("time step must be positive")
    return 2.0 * (s_f_new - s_f_old) / (k * (s_f_new + s_f_old)) + r_m - 0.5 * sigma_m**2


def exercise_region_values(s_f: float, x, strike: float):
    """Closed-form solution in the exercise region ``x <= 0``.

    There the put is exercised, ``V = K - S``, so the transformed price is
    ``u = K - s_f e^x`` and all three derivatives equal ``-s_f e^x``.
    Accepts a scalar or an array of coordinates.
    """
    if s_f <= 0.0:
        raise NonpositiveBoundary(f"boundary must be positive, got {s_f}")
    moneyness = s_f * np.exp(x)
    u = strike - moneyness
    d = -moneyness
    return u, d, d, d


def initial_state(model: RegimeModel, grid: GridSpec) -> list[RegimeState]:
    """States at time-to-expiry zero: payoff has no value on ``x >= 0``.

    All four arrays start identically zero (the corner value of the delta
    array at ``x = 0`` is set to 0; using a left/right average there makes no
    measurable difference downstream) and every boundary starts at the strike.
    """
    n = grid.M + 1
    states = []
    for _ in range(model.num_regimes):
        states.append(
            RegimeState(
                u=np.zeros(n),
                w=np.zeros(n),
                y=np.zeros(n),
                z=np.zeros(n),
                s_f=model.strike,
                s_f_prev=model.strike,
            )
        )
    return states
