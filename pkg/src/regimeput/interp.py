"""Frame mapping and Hermite evaluation of foreign-regime fields.

Each regime lives on its own log-moneyness interval ``[0, x_max]`` anchored
at its own boundary, so a grid node of regime ``m`` maps into regime ``l`` at
``x_l = x_m - ln(s_f(l) / s_f(m))``.  The mapped point falls into one of
three branches: left of the interval (exercise region, closed form), inside
(Hermite interpolation), or beyond the far boundary (zero).

Interpolation is Hermite because nodal derivatives are available for free:
the delta array is the derivative of the value array, gamma of delta, speed
of gamma, and a finite-difference slope closes the chain for speed.  Cubic
uses one bracketing interval, quintic a three-node stencil.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import GridTooSmall, NonpositiveBoundary, OutOfBracket
from .model import GridSpec, RegimeState, exercise_region_values

Branch = Literal["left", "interior", "right"]


@dataclass(frozen=True)
class FrameMap:
    """Shift between two regime frames at a common time level."""

    log_ratio: float  # ln(s_f(l) / s_f(m))

    @classmethod
    def between(cls, s_f_l: float, s_f_m: float) -> "FrameMap":
        if s_f_l <= 0.0 or s_f_m <= 0.0:
            raise NonpositiveBoundary(
                f"boundaries must be positive, got {s_f_l} and {s_f_m}"
            )
        return cls(log_ratio=math.log(s_f_l / s_f_m))

    def to_foreign(self, x_m):
        return x_m - self.log_ratio


@dataclass(frozen=True)
class CubicWeights:
    """Two-node Hermite weights: values at ``j``, ``j+1``; slopes at both."""

    a_c: float
    b_c: float
    c_c: float
    d_c: float


@dataclass(frozen=True)
class QuinticWeights:
    """Three-node Hermite weights.

    ``a_q..f_q`` evaluate the interpolant itself (values then slopes at
    nodes ``j-1``, ``j``, ``j+1``); ``g_q..s_q`` evaluate its derivative.
    """

    a_q: float
    b_q: float
    c_q: float
    d_q: float
    e_q: float
    f_q: float
    g_q: float
    o_q: float
    p_q: float
    q_q: float
    r_q: float
    s_q: float


def map_point(
    x_m: float,
    s_f_l: float,
    s_f_m: float,
    grid: GridSpec,
    order: str = "cubic",
) -> tuple[float, int, Branch]:
    """Map an m-frame coordinate into regime l and classify it.

    Returns ``(x_l, j, branch)`` where ``j`` is the bracket index: the left
    node of the bracketing interval for cubic, the center of the three-node
    stencil for quintic.  ``j`` is meaningful only for the interior branch.
    """
    frame = FrameMap.between(s_f_l, s_f_m)
    x_l = frame.to_foreign(x_m)
    if x_l <= 0.0:
        return x_l, 0, "left"
    if x_l > grid.x_max:
        return x_l, grid.M, "right"
    j = int(math.floor(x_l / grid.h))
    if order == "quintic":
        j = min(max(j, 1), grid.M - 1)
    else:
        j = min(max(j, 0), grid.M - 1)
    return x_l, j, "interior"


def _cubic_t(x_star, x_j, h):
    t = (np.asarray(x_star, dtype=float) - x_j) / h
    return t


def cubic_basis(t, h):
    """Cubic Hermite basis at local coordinate ``t in [0, 1]``."""
    omt = 1.0 - t
    a = (1.0 + 2.0 * t) * omt * omt
    b = t * t * (3.0 - 2.0 * t)
    c = h * t * omt * omt
    d = h * t * t * (t - 1.0)
    return a, b, c, d


def cubic_weights(x_star: float, x_j: float, h: float) -> CubicWeights:
    """Weights of the two-node Hermite interpolant at ``x_star``."""
    t = float(_cubic_t(x_star, x_j, h))
    if t < -1e-12 or t > 1.0 + 1e-12:
        raise OutOfBracket(
            f"x_star = {x_star} outside bracket [{x_j}, {x_j + h}]"
        )
    a, b, c, d = cubic_basis(t, h)
    return CubicWeights(a_c=float(a), b_c=float(b), c_c=float(c), d_c=float(d))


def quintic_basis(t, h):
    """Quintic Hermite value basis at local coordinate ``t in [-1, 1]``.

    Node order: values at ``j-1``, ``j``, ``j+1`` then slopes at the same
    nodes.  Exact for polynomials of degree five.
    """
    t2 = t * t
    tm = t - 1.0
    tp = t + 1.0
    tm2 = tm * tm
    tp2 = tp * tp
    a = (3.0 * t + 4.0) * t2 * tm2 / 4.0
    b = tm2 * tp2
    c = (4.0 - 3.0 * t) * t2 * tp2 / 4.0
    d = h * tp * t2 * tm2 / 4.0
    e = h * t * tm2 * tp2
    f = h * tm * t2 * tp2 / 4.0
    return a, b, c, d, e, f


def quintic_derivative_basis(t, h):
    """Derivative (with respect to x) of the quintic Hermite basis."""
    t2 = t * t
    tm = t - 1.0
    tp = t + 1.0
    tm2 = tm * tm
    tp2 = tp * tp
    g = (3.0 * t2 * tm2 + (3.0 * t + 4.0) * 2.0 * t * tm * (2.0 * t - 1.0)) / (4.0 * h)
    o = 4.0 * t * (t2 - 1.0) / h
    p = (-3.0 * t2 * tp2 + (4.0 - 3.0 * t) * 2.0 * t * tp * (2.0 * t + 1.0)) / (4.0 * h)
    q = (t2 * tm2 + tp * 2.0 * t * tm * (2.0 * t - 1.0)) / 4.0
    r = tm2 * tp2 + 4.0 * t2 * (t2 - 1.0)
    s = (t2 * tp2 + tm * 2.0 * t * tp * (2.0 * t + 1.0)) / 4.0
    return g, o, p, q, r, s


def quintic_weights(x_star: float, x_j: float, h: float) -> QuinticWeights:
    """Weights of the three-node Hermite interpolant centered at ``x_j``."""
    t = float((x_star - x_j) / h)
    if t < -1.0 - 1e-12 or t > 1.0 + 1e-12:
        raise OutOfBracket(
            f"x_star = {x_star} outside stencil [{x_j - h}, {x_j + h}]"
        )
    a, b, c, d, e, f = quintic_basis(t, h)
    g, o, p, q, r, s = quintic_derivative_basis(t, h)
    return QuinticWeights(
        a_q=float(a), b_q=float(b), c_q=float(c),
        d_q=float(d), e_q=float(e), f_q=float(f),
        g_q=float(g), o_q=float(o), p_q=float(p),
        q_q=float(q), r_q=float(r), s_q=float(s),
    )


@dataclass(frozen=True)
class CouplingSample:
    """Foreign-regime field values at one mapped point."""

    u: float
    w: float
    y: float
    z: float


def z_derivative(z, h: float):
    """Fourth-order nodal slope of the speed array.

    Centered five-point stencil in the interior, one-sided five-point
    stencils at the two nodes nearest each end.  Exact for polynomials of
    degree four.
    """
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    if n < 5:
        raise GridTooSmall(f"need at least 5 nodes for the slope stencil, got {n}")
    out = np.empty_like(z)
    inv = 1.0 / (12.0 * h)
    out[2:-2] = (z[:-4] - 8.0 * z[1:-3] + 8.0 * z[3:-1] - z[4:]) * inv
    out[0] = (-25.0 * z[0] + 48.0 * z[1] - 36.0 * z[2] + 16.0 * z[3] - 3.0 * z[4]) * inv
    out[1] = (-3.0 * z[0] - 10.0 * z[1] + 18.0 * z[2] - 6.0 * z[3] + z[4]) * inv
    out[-2] = (z[-5] - 6.0 * z[-4] + 18.0 * z[-3] - 10.0 * z[-2] - 3.0 * z[-1]) * -inv
    out[-1] = (3.0 * z[-5] - 16.0 * z[-4] + 36.0 * z[-3] - 48.0 * z[-2] + 25.0 * z[-1]) * inv
    return out


def sample_stacks(
    values: np.ndarray,
    slopes: np.ndarray,
    s_f_l: float,
    x_targets: np.ndarray,
    s_f_m: float,
    strike: float,
    grid: GridSpec,
    order: str = "cubic",
):
    """Evaluate stacked fields of regime l at m-frame coordinates.

    ``values`` and ``slopes`` are ``(4, M+1)`` stacks of the four fields and
    their chain derivatives (value/delta, delta/gamma, gamma/speed,
    speed/finite-difference slope).  Returns a ``(4, len(x_targets))``
    array; the left branch uses the exercise-region closed form, the right
    branch is zero.
    """
    if s_f_l <= 0.0 or s_f_m <= 0.0:
        raise NonpositiveBoundary(
            f"boundaries must be positive, got {s_f_l} and {s_f_m}"
        )
    xs = x_targets - math.log(s_f_l / s_f_m)
    scaled = xs * (1.0 / grid.h)
    raw = np.floor(scaled).astype(np.int64)
    if order == "quintic" and grid.M >= 2:
        j = np.minimum(np.maximum(raw, 1), grid.M - 1)
        t = scaled - j
        a, b, c, d, e, f = quintic_basis(t, grid.h)
        out = (
            a * values[:, j - 1] + b * values[:, j] + c * values[:, j + 1]
            + d * slopes[:, j - 1] + e * slopes[:, j] + f * slopes[:, j + 1]
        )
    else:
        j = np.minimum(np.maximum(raw, 0), grid.M - 1)
        t = scaled - j
        a, b, c, d = cubic_basis(t, grid.h)
        out = (
            a * values[:, j] + b * values[:, j + 1]
            + c * slopes[:, j] + d * slopes[:, j + 1]
        )
    left = xs <= 0.0
    if left.any():
        moneyness = s_f_l * np.exp(xs[left])
        out[0, left] = strike - moneyness
        out[1:, left] = -moneyness
    right = xs > grid.x_max
    if right.any():
        out[:, right] = 0.0
    return out


def sample_fields(
    state_l: RegimeState,
    x_targets,
    s_f_m: float,
    strike: float,
    grid: GridSpec,
    order: str = "cubic",
    z_slope=None,
):
    """Vectorized evaluation of ``(u, w, y, z)`` of regime l at mapped points.

    ``x_targets`` are coordinates in the m-frame; the mapped coordinate is
    shifted by the current boundary ratio.  Returns an array of shape
    ``(4, len(x_targets))``.  Each field is interpolated from its own nodal
    values with its chain derivative in the slope slots: value with delta,
    delta with gamma, gamma with speed, speed with its finite-difference
    slope (``z_slope``, computed here when not supplied).
    """
    if z_slope is None:
        z_slope = z_derivative(state_l.z, grid.h)
    values = np.stack([state_l.u, state_l.w, state_l.y, state_l.z])
    slopes = np.stack([state_l.w, state_l.y, state_l.z, z_slope])
    return sample_stacks(
        values, slopes, state_l.s_f, np.asarray(x_targets, dtype=float),
        s_f_m, strike, grid, order,
    )


def sample_coupling(
    state_l: RegimeState,
    x_m: float,
    s_f_m: float,
    strike: float,
    grid: GridSpec,
    order: str = "cubic",
    z_slope=None,
) -> CouplingSample:
    """Evaluate one mapped point of a foreign regime (scalar convenience)."""
    fields = sample_fields(
        state_l, np.array([x_m]), s_f_m, strike, grid, order=order, z_slope=z_slope
    )
    return CouplingSample(
        u=float(fields[0, 0]),
        w=float(fields[1, 0]),
        y=float(fields[2, 0]),
        z=float(fields[3, 0]),
    )
