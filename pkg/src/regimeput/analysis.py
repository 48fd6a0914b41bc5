"""Verification instruments: refinement error, rates, and stability check.

The refinement error compares the first regime's transformed value array at
the final time level between a grid and its 2x refinement (time step
quartered so the parabolic scaling is preserved), at the coincident nodes.
The stability check evaluates the von Neumann amplification factors of the
decoupled scheme kernel: a Fourier mode's four-field amplitude vector is
advanced by a lower-triangular-block matrix whose eigenvalues come out in
closed form, two equal real ones and a complex-conjugate pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, NonpositiveError, NonpositiveMu


@dataclass
class RefinementStudy:
    """Error/rate ladder of a halving sequence (k = h^2 at every level)."""

    levels: list  # (h, k, max_error or None for the finest level)
    rates: list = field(default_factory=list)


@dataclass(frozen=True)
class AmplificationSpectrum:
    """Reduced Fourier-symbol coefficients and the four mode moduli."""

    p: float
    q: float
    r: float
    s: float
    moduli: tuple


def max_error(coarse_u: np.ndarray, fine_u: np.ndarray) -> float:
    """Max nodal difference between a grid and its 2x refinement.

    ``fine_u`` must live on the once-halved grid, so its even-indexed nodes
    coincide with the coarse nodes.
    """
    coarse_u = np.asarray(coarse_u, dtype=float)
    fine_u = np.asarray(fine_u, dtype=float)
    if fine_u.shape[0] != 2 * coarse_u.shape[0] - 1:
        raise GridMismatch(
            f"fine grid has {fine_u.shape[0]} nodes, expected "
            f"{2 * coarse_u.shape[0] - 1} for a 2x refinement of "
            f"{coarse_u.shape[0]}"
        )
    return float(np.max(np.abs(coarse_u - fine_u[::2])))


def convergence_rate(error_coarse: float, error_fine: float) -> float:
    """Base-2 logarithmic rate between two successive refinement errors."""
    if error_coarse <= 0.0 or error_fine <= 0.0:
        raise NonpositiveError(
            f"errors must be positive, got {error_coarse} and {error_fine}"
        )
    return math.log2(error_coarse / error_fine)


def amplification_spectrum(
    mu: float, kappa: float, omega_k: float, beta_h: float, h: float = 1.0
) -> AmplificationSpectrum:
    """Amplification-factor moduli of the decoupled scheme kernel.

    ``mu`` is the diffusion number, ``kappa`` the reaction number,
    ``omega_k`` the drift coefficient times the time step and ``beta_h``
    the wavenumber-step product.  Inter-regime coupling is ignored, as in
    the underlying analysis.  The symbol matrix is block triangular: two
    eigenvalues equal the ratio of the backward and forward symbols, and
    the remaining conjugate pair has squared modulus
    ``(q^2 + varpi) / (p^2 + varpi)`` with ``varpi = -r s >= 0``, so every
    modulus is bounded by one whenever ``mu > 0``.
    """
    if mu <= 0.0:
        raise NonpositiveMu(f"diffusion number must be positive, got {mu}")
    s2 = math.sin(0.5 * beta_h) ** 2
    base = 1.0 - s2 / 3.0 + 0.5 * kappa - 0.5 * kappa * s2
    p = base + 4.0 * mu * s2
    q = base - 4.0 * mu * s2
    r = -2.0 * omega_k / (h * h) * s2
    s = omega_k * (0.5 - s2 / 6.0)
    varpi = -r * s
    mod_repeated = abs(q / p)
    mod_pair = math.sqrt((q * q + varpi) / (p * p + varpi))
    return AmplificationSpectrum(
        p=p, q=q, r=r, s=s,
        moduli=(mod_repeated, mod_repeated, mod_pair, mod_pair),
    )


def refinement_study(solutions: list) -> RefinementStudy:
    """Assemble the error/rate ladder from per-level final value arrays.

    ``solutions`` holds ``(h, k, u_regime1)`` tuples ordered from coarsest
    to finest with strictly halving ``h``.
    """
    levels = []
    errors = []
    for i, (h, k, u) in enumerate(solutions):
        if i + 1 < len(solutions):
            err = max_error(u, solutions[i + 1][2])
            errors.append(err)
            levels.append((h, k, err))
        else:
            levels.append((h, k, None))
    rates = [
        convergence_rate(errors[i], errors[i + 1]) for i in range(len(errors) - 1)
    ]
    return RefinementStudy(levels=levels, rates=rates)
