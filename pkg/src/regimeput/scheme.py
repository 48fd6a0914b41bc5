"""Crank-Nicolson compact finite-difference assembly and tridiagonal solves.

Interior rows combine the (1, 10, 1)/12 mass weighting with the (1, -2, 1)
second difference, which is fourth-order accurate in space on a three-point
stencil.  The first row of the value system is special: at the anchored
boundary node the one-sided compact identity

    (7/4) f''(x0) + (3/4) f''(x1) = (5/h^2)[f(x1) - f(x0)] - (5/h) f'(x0)
                                    - (h/4) f'''(x0) + (h/6) f'''(x1) + O(h^4)

closes the stencil using the known slope at the boundary (the smooth-pasting
condition gives ``w(0) - u(0) = -K``), the delta equation for the two
third-derivative values, and a one-sided fourth-order expression for the
gamma value at the boundary node.

Within one time step the four fields are solved in chain order
u -> w -> y -> z.  In each system only that field at the new level is
unknown; every cross-field and cross-regime term sits on the right-hand
side at the current iterate.  The resulting matrices are constant across
time steps and iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack as _lapack

from .errors import DimensionMismatch, SingularPivot
from .model import GridSpec

_dgtsv = _lapack.get_lapack_funcs(("gtsv",), (np.empty(0, dtype=np.float64),))[0]


@dataclass
class TridiagonalSystem:
    """Tridiagonal system ``A x = rhs``.

    ``sub`` and ``sup`` have the same length ``n`` as ``diag`` with
    ``sub[0]`` and ``sup[-1]`` unused (kept zero).
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = self.diag.shape[0]
        for name in ("sub", "sup", "rhs"):
            if getattr(self, name).shape[0] != n:
                raise DimensionMismatch(
                    f"{name} has length {getattr(self, name).shape[0]}, expected {n}"
                )

    def dense(self) -> np.ndarray:
        """Materialize the full matrix (for tests and small oracles)."""
        n = self.diag.shape[0]
        a = np.zeros((n, n))
        idx = np.arange(n)
        a[idx, idx] = self.diag
        a[idx[1:], idx[:-1]] = self.sub[1:]
        a[idx[:-1], idx[1:]] = self.sup[:-1]
        return a


@dataclass(frozen=True)
class SchemeCoefficients:
    """Dimensionless groups of one regime's scheme.

    ``mu`` is the diffusion number ``sigma^2 k / (4 h^2)``, ``kappa`` the
    reaction number ``(r - q_mm) k``, and ``omega_k`` the drift coefficient
    scaled by the time step.
    """

    mu: float
    kappa: float
    omega_k: float

    @classmethod
    def for_regime(
        cls, sigma: float, r: float, q_mm: float, grid: GridSpec, omega: float = 0.0
    ) -> "SchemeCoefficients":
        return cls(
            mu=sigma**2 * grid.k / (4.0 * grid.h**2),
            kappa=(r - q_mm) * grid.k,
            omega_k=omega * grid.k,
        )

    def sigma_sq(self, grid: GridSpec) -> float:
        return self.mu * 4.0 * grid.h**2 / grid.k

    def reaction(self, grid: GridSpec) -> float:
        return self.kappa / grid.k


def _mass(f: np.ndarray) -> np.ndarray:
    """(1, 10, 1) weighting of interior nodes; length M-1."""
    return f[:-2] + 10.0 * f[1:-1] + f[2:]


def _lap(f: np.ndarray) -> np.ndarray:
    """(1, -2, 1) second difference of interior nodes; length M-1."""
    return f[:-2] - 2.0 * f[1:-1] + f[2:]


def _interior_bands(sigma_sq: float, rq: float, grid: GridSpec):
    h, k = grid.h, grid.k
    off = 1.0 / (12.0 * k) - sigma_sq / (4.0 * h * h) + rq / 24.0
    mid = 10.0 / (12.0 * k) + sigma_sq / (2.0 * h * h) + 10.0 * rq / 24.0
    return off, mid


def value_matrix(coeffs: SchemeCoefficients, grid: GridSpec) -> TridiagonalSystem:
    """Constant matrix of the value (u) system, boundary row included."""
    h, k = grid.h, grid.k
    n = grid.M + 1
    sigma_sq = coeffs.sigma_sq(grid)
    rq = coeffs.reaction(grid)
    sub = np.zeros(n)
    diag = np.zeros(n)
    sup = np.zeros(n)
    off, mid = _interior_bands(sigma_sq, rq, grid)
    sub[1:-1] = off
    sup[1:-1] = off
    diag[1:-1] = mid
    diag[0] = (
        (7.0 + h) / (4.0 * k)
        + 5.0 * sigma_sq / (4.0 * h * h)
        + 5.0 * sigma_sq / (4.0 * h)
        + (7.0 + h) * rq / 8.0
    )
    sup[0] = 3.0 / (4.0 * k) - 5.0 * sigma_sq / (4.0 * h * h) + 3.0 * rq / 8.0
    diag[-1] = 1.0
    return TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=np.zeros(n))


def derivative_matrix(coeffs: SchemeCoefficients, grid: GridSpec) -> TridiagonalSystem:
    """Constant matrix shared by the delta, gamma and speed systems."""
    n = grid.M + 1
    sigma_sq = coeffs.sigma_sq(grid)
    rq = coeffs.reaction(grid)
    sub = np.zeros(n)
    diag = np.zeros(n)
    sup = np.zeros(n)
    off, mid = _interior_bands(sigma_sq, rq, grid)
    sub[1:-1] = off
    sup[1:-1] = off
    diag[1:-1] = mid
    diag[0] = 1.0
    diag[-1] = 1.0
    return TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=np.zeros(n))


def assemble_value_system(
    u_n: np.ndarray,
    w_n: np.ndarray,
    y_n: np.ndarray,
    w_guess: np.ndarray,
    y_guess: np.ndarray,
    coupling_u: np.ndarray,
    coupling_w: np.ndarray,
    coeffs: SchemeCoefficients,
    omega: float,
    grid: GridSpec,
    strike: float,
    matrix: TridiagonalSystem | None = None,
) -> TridiagonalSystem:
    """Build the linear system for the value field at the new time level.

    ``u_n``/``w_n``/``y_n`` are the stored level-n arrays, ``w_guess`` and
    ``y_guess`` the current iterate of delta and gamma at the new level.
    The coupling arrays carry the generator-weighted foreign-field samples
    already summed over the two time levels.  Known terms are moved to the
    right-hand side so the unknown is the new value array alone.
    """
    n = grid.M + 1
    for name, arr in (
        ("u_n", u_n), ("w_n", w_n), ("y_n", y_n),
        ("w_guess", w_guess), ("y_guess", y_guess),
        ("coupling_u", coupling_u), ("coupling_w", coupling_w),
    ):
        if arr.shape[0] != n:
            raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {n}")
    h, k = grid.h, grid.k
    sigma_sq = coeffs.sigma_sq(grid)
    rq = coeffs.reaction(grid)
    system = value_matrix(coeffs, grid) if matrix is None else matrix

    w2 = w_guess + w_n
    y2 = y_guess + y_n
    rhs = np.zeros(n)
    mass_un = _mass(u_n)
    rhs[1:-1] = (
        mass_un / (12.0 * k)
        + sigma_sq / (4.0 * h * h) * _lap(u_n)
        + omega / 24.0 * _mass(w2)
        - rq / 24.0 * mass_un
        + _mass(coupling_u) / 24.0
    )
    rhs[0] = (
        (7.0 + h) / (4.0 * k) * u_n[0]
        + 3.0 / (4.0 * k) * u_n[1]
        - 5.0 * sigma_sq / (4.0 * h * h) * (u_n[0] - u_n[1])
        - 5.0 * sigma_sq / (4.0 * h) * u_n[0]
        + 5.0 * sigma_sq / (2.0 * h) * strike
        + h * rq / 4.0 * strike
        - rq / 8.0 * ((7.0 + h) * u_n[0] + 3.0 * u_n[1])
        + h / (6.0 * k) * (w_guess[1] - w_n[1])
        + h * rq / 12.0 * w2[1]
        + omega / 8.0 * (4.0 * w2[0] + 3.0 * w2[1] + 3.0 * w2[2])
        - h * omega / 24.0 * (14.0 * y2[1] + 3.0 * y2[2])
        + (7.0 * coupling_u[0] + 3.0 * coupling_u[1]) / 8.0
        + h * (3.0 * coupling_w[0] - 2.0 * coupling_w[1]) / 24.0
    )
    rhs[-1] = 0.0
    return TridiagonalSystem(sub=system.sub, diag=system.diag, sup=system.sup, rhs=rhs)


def assemble_derivative_system(
    f_n: np.ndarray,
    g_sum: np.ndarray,
    coupling_f: np.ndarray,
    coeffs: SchemeCoefficients,
    omega: float,
    grid: GridSpec,
    boundary_value: float,
    matrix: TridiagonalSystem | None = None,
) -> TridiagonalSystem:
    """Build the system for one derivative field (delta, gamma or speed).

    ``g_sum`` is the chain predecessor summed over both time levels (value
    for delta, delta for gamma, gamma for speed); its second difference is
    the drift source.  Row 0 pins the field to ``boundary_value`` (minus the
    current boundary), row M to zero.
    """
    n = grid.M + 1
    for name, arr in (
        ("f_n", f_n), ("g_sum", g_sum), ("coupling_f", coupling_f),
    ):
        if arr.shape[0] != n:
            raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {n}")
    h, k = grid.h, grid.k
    sigma_sq = coeffs.sigma_sq(grid)
    rq = coeffs.reaction(grid)
    system = derivative_matrix(coeffs, grid) if matrix is None else matrix

    mass_fn = _mass(f_n)
    rhs = np.zeros(n)
    rhs[1:-1] = (
        mass_fn / (12.0 * k)
        + sigma_sq / (4.0 * h * h) * _lap(f_n)
        + omega / (2.0 * h * h) * _lap(g_sum)
        - rq / 24.0 * mass_fn
        + _mass(coupling_f) / 24.0
    )
    rhs[0] = boundary_value
    rhs[-1] = 0.0
    return TridiagonalSystem(sub=system.sub, diag=system.diag, sup=system.sup, rhs=rhs)


def thomas_solve(system: TridiagonalSystem) -> np.ndarray:
    """Direct O(n) elimination for a tridiagonal system.

    Reference implementation without pivoting; raises on a vanishing pivot.
    The time-stepping hot path uses the LAPACK equivalent (`fast_solve`),
    which is cross-checked against this routine in the tests.
    """
    n = system.diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    piv = system.diag[0]
    if piv == 0.0:
        raise SingularPivot("zero pivot at row 0")
    cp[0] = system.sup[0] / piv
    dp[0] = system.rhs[0] / piv
    for i in range(1, n):
        piv = system.diag[i] - system.sub[i] * cp[i - 1]
        if piv == 0.0:
            raise SingularPivot(f"zero pivot at row {i}")
        cp[i] = system.sup[i] / piv if i < n - 1 else 0.0
        dp[i] = (system.rhs[i] - system.sub[i] * dp[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        dp[i] -= cp[i] * dp[i + 1]
    return dp


def fast_solve(system: TridiagonalSystem) -> np.ndarray:
    """LAPACK-backed tridiagonal solve used in the time-stepping loop."""
    _, _, _, x, info = _dgtsv(
        system.sub[1:], system.diag, system.sup[:-1], system.rhs
    )
    if info != 0:
        raise SingularPivot(f"tridiagonal solve failed (info={info})")
    return x


def compact_boundary_residual(f, df, d2f, d3f, x0: float, h: float) -> float:
    """Remainder of the one-sided compact identity for the second derivative.

    Takes callables for the function and its first three derivatives,
    evaluates both sides of the (7/4, 3/4) boundary combination on
    ``[x0, x0 + h]`` and returns left minus right.  The remainder is
    fourth order in ``h`` and vanishes for cubic polynomials; used only in
    verification.
    """
    x1 = x0 + h
    lhs = 1.75 * d2f(x0) + 0.75 * d2f(x1)
    rhs = (
        5.0 / (h * h) * (f(x1) - f(x0))
        - 5.0 / h * df(x0)
        - h / 4.0 * d3f(x0)
        + h / 6.0 * d3f(x1)
    )
    return lhs - rhs
