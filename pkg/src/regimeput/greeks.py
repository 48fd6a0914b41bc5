"""Time-derivative Greeks and conversion to asset-space quantities.

The solver evolves the transformed value ``u`` and its space derivatives
``w, y, z``; backward differences in time of ``u``, ``w`` and ``y`` give the
transformed-space rate fields.  Converting to asset space uses the chain
rule of the log-moneyness map, which drags in the logarithmic boundary
velocity.  Reported theta, delta decay and color follow the market (decay)
sign convention, i.e. they are derivatives with respect to calendar time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory, NonpositiveAsset
from .interp import cubic_basis, z_derivative
from .model import GridSpec, RegimeState


@dataclass
class GreeksField:
    """Transformed-space time derivatives of value, delta and gamma."""

    theta: np.ndarray
    delta_decay: np.ndarray
    color: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "GreeksField":
        return cls(theta=np.zeros(n), delta_decay=np.zeros(n), color=np.zeros(n))


@dataclass(frozen=True)
class PhysicalGreeks:
    """Asset-space sensitivities at one queried asset level."""

    delta: float
    gamma: float
    speed: float
    theta: float
    delta_decay: float
    color: float


def update_time_greeks(u_hist, w_hist, y_hist, k: float, n: int) -> GreeksField:
    """Backward-difference rate fields at time level ``n``.

    The histories list the most recent levels oldest first.  At the first
    level only a two-point difference is available; afterwards the
    three-level second-order formula is used.  Both are exact for fields
    linear in time, the second-order one also for quadratics.
    """
    if n < 1:
        raise InsufficientHistory("time-derivative fields start at level 1")
    if n == 1:
        for hist in (u_hist, w_hist, y_hist):
            if len(hist) < 2:
                raise InsufficientHistory("need two levels for the first step")
        return GreeksField(
            theta=(u_hist[-1] - u_hist[-2]) / k,
            delta_decay=(w_hist[-1] - w_hist[-2]) / k,
            color=(y_hist[-1] - y_hist[-2]) / k,
        )
    for hist in (u_hist, w_hist, y_hist):
        if len(hist) < 3:
            raise InsufficientHistory(f"need three levels at level {n}")

    def second_order(hist):
        return (3.0 * hist[-1] - 4.0 * hist[-2] + hist[-3]) / (2.0 * k)

    return GreeksField(
        theta=second_order(u_hist),
        delta_decay=second_order(w_hist),
        color=second_order(y_hist),
    )


def log_boundary_slope(boundary_values, k: float) -> float:
    """Backward-difference estimate of ``d ln s_f / d tau`` at the last level.

    Matches the order of the rate fields: two-point at the first level,
    three-level second order afterwards.
    """
    vals = np.asarray(boundary_values, dtype=float)
    if vals.shape[0] < 2:
        return 0.0
    logs = np.log(vals)
    if vals.shape[0] == 2:
        return float((logs[-1] - logs[-2]) / k)
    return float((3.0 * logs[-1] - 4.0 * logs[-2] + logs[-3]) / (2.0 * k))


def to_physical(
    state: RegimeState,
    greeks: GreeksField,
    s_f_slope: float,
    S: float,
    strike: float,
    grid: GridSpec,
) -> PhysicalGreeks:
    """Asset-space Greeks at asset level ``S``.

    In the exercise region the price is exactly the payoff, so delta is -1
    and every other sensitivity vanishes.  In the continuation region the
    seven nodal fields are Hermite-interpolated at ``ln(S / s_f)`` and
    combined through the inverse coordinate map; ``s_f_slope`` is the
    current logarithmic boundary velocity.
    """
    if S <= 0.0:
        raise NonpositiveAsset(f"asset price must be positive, got {S}")
    if S <= state.s_f:
        return PhysicalGreeks(
            delta=-1.0, gamma=0.0, speed=0.0, theta=0.0, delta_decay=0.0, color=0.0
        )
    x = math.log(S / state.s_f)
    if x >= grid.x_max:
        return PhysicalGreeks(
            delta=0.0, gamma=0.0, speed=0.0, theta=0.0, delta_decay=0.0, color=0.0
        )
    zdot = z_derivative(state.z, grid.h)
    color_slope = z_derivative(greeks.color, grid.h)
    values = np.stack(
        [state.u, state.w, state.y, state.z,
         greeks.theta, greeks.delta_decay, greeks.color]
    )
    slopes = np.stack(
        [state.w, state.y, state.z, zdot,
         greeks.delta_decay, greeks.color, color_slope]
    )
    j = min(max(int(math.floor(x / grid.h)), 0), grid.M - 1)
    t = x / grid.h - j
    a, b, c, d = cubic_basis(t, grid.h)
    _, w, y, z, theta_t, decay_t, color_t = (
        a * values[:, j] + b * values[:, j + 1]
        + c * slopes[:, j] + d * slopes[:, j + 1]
    )
    return PhysicalGreeks(
        delta=w / S,
        gamma=(y - w) / S**2,
        speed=(2.0 * w - 3.0 * y + z) / S**3,
        theta=-(theta_t - s_f_slope * w),
        delta_decay=-(decay_t - s_f_slope * y) / S,
        color=-(color_t - decay_t + s_f_slope * (y - z)) / S**2,
    )
