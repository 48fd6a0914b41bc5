"""Time stepping: per-step nonlinear iteration and full-horizon solves.

Each time step solves a small nonlinear fixed-point problem: the new
boundary position enters the drift coefficient and the inter-regime
coupling, both of which feed back into the value system that determines
the boundary.  Two iteration styles are provided:

* Gauss-Seidel sweeps regimes in order, always consuming the freshest
  foreign-regime iterate, and re-interpolates the coupling every sweep.
  The sweep map contracts slowly in its boundary mode near the expiry
  singularity, so iterates are Anderson-mixed between sweeps; the
  converged step satisfies the same equations and stopping rule as plain
  sweeping.
* Newton treats the coupling explicitly (frozen at the previous iterate,
  refreshed between iterations) and runs separate phases for the value
  system and the three derivative systems, updating through the constant
  tridiagonal Jacobian.  Within the value phase delta and gamma stay at
  their previous-level values, and the boundary nonlinearity is a scalar
  root-find per regime.

Regimes that share no generator entries are partitioned into independent
groups up front, so a zero generator reduces exactly, bit for bit, to
independent single-regime solves.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NonpositiveAsset, RegimeOutOfRange, SolveFailure
from .greeks import GreeksField, update_time_greeks
from .interp import cubic_basis, sample_stacks, z_derivative
from .model import (
    BoundaryHistory,
    GridSpec,
    RegimeModel,
    RegimeState,
    initial_state,
    omega as omega_coefficient,
)
from .scheme import (
    SchemeCoefficients,
    TridiagonalSystem,
    assemble_derivative_system,
    assemble_value_system,
    derivative_matrix,
    fast_solve,
    value_matrix,
)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the per-step iteration and the mesh it runs on."""

    grid: GridSpec
    method: str = "gs"  # "gs" or "newton"
    interpolation: str = "quintic"  # "cubic" or "quintic"
    epsilon: float = 1e-8
    max_iterations: int = 100
    parallel: bool = False

    def __post_init__(self):
        if self.method not in ("gs", "newton"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.interpolation not in ("cubic", "quintic"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class SolveResult:
    """Final fields, boundary path, Greeks and run statistics."""

    states: list[RegimeState]
    boundary: BoundaryHistory
    greeks: list[GreeksField]
    iterations: list[int]
    wall_time: float
    model: RegimeModel
    grid: GridSpec
    config: SolverConfig


class _RegimeWork:
    """Per-regime constants reused across every step and iteration."""

    def __init__(self, model: RegimeModel, grid: GridSpec, m: int):
        q = model.generator.entries
        self.r = float(model.rates[m])
        self.sigma = float(model.vols[m])
        self.q_mm = float(q[m, m])
        self.coeffs = SchemeCoefficients.for_regime(
            self.sigma, self.r, self.q_mm, grid
        )
        self.value_matrix = value_matrix(self.coeffs, grid)
        self.deriv_matrix = derivative_matrix(self.coeffs, grid)
        self.partners = [
            l for l in range(model.num_regimes) if l != m and q[m, l] != 0.0
        ]


class _Stacks:
    """Stacked field and chain-slope arrays of one regime's iterate."""

    __slots__ = ("values", "slopes")

    def __init__(self, state: RegimeState, h: float):
        self.refresh(state, h)

    def refresh(self, state: RegimeState, h: float):
        self.values = np.stack([state.u, state.w, state.y, state.z])
        self.slopes = np.stack(
            [state.w, state.y, state.z, z_derivative(state.z, h)]
        )


def coupling_groups(generator_entries) -> list[list[int]]:
    """Partition regimes into connected groups of the coupling graph.

    Two regimes belong to the same group when either generator entry
    between them is nonzero.  Groups evolve independently, so they are
    stepped separately; with a zero generator every regime is its own
    group and the solve reduces to independent single-regime solves.
    """
    q = np.asarray(generator_entries)
    n = q.shape[0]
    seen = [False] * n
    groups = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        group = []
        while stack:
            m = stack.pop()
            group.append(m)
            for l in range(n):
                if not seen[l] and (q[m, l] != 0.0 or q[l, m] != 0.0):
                    seen[l] = True
                    stack.append(l)
        groups.append(sorted(group))
    return groups


def _coupling_sum(
    m: int,
    stacks: dict,
    boundaries: dict,
    s_f_m: float,
    work: list[_RegimeWork],
    model: RegimeModel,
    grid: GridSpec,
    order: str,
    x_nodes: np.ndarray,
) -> np.ndarray:
    """Generator-weighted foreign-field samples at every node of regime m."""
    total = np.zeros((4, grid.M + 1))
    q = model.generator.entries
    for l in work[m].partners:
        fields = sample_stacks(
            stacks[l].values, stacks[l].slopes, boundaries[l],
            x_nodes, s_f_m, model.strike, grid, order,
        )
        total += q[m, l] * fields
    return total


def _solve_derivative(
    f_n, g_sum, coupling_f, work_m, om, grid, boundary_value
) -> np.ndarray:
    system = assemble_derivative_system(
        f_n, g_sum, coupling_f, work_m.coeffs, om, grid,
        boundary_value, matrix=work_m.deriv_matrix,
    )
    f_new = fast_solve(system)
    f_new[0] = boundary_value
    f_new[-1] = 0.0
    return f_new


def _self_consistent_value_solve(
    old_m: RegimeState,
    w_guess: np.ndarray,
    y_guess: np.ndarray,
    coupling_u: np.ndarray,
    coupling_w: np.ndarray,
    wm: _RegimeWork,
    grid: GridSpec,
    strike: float,
    s_start: float,
    inner_tol: float,
    max_inner: int = 60,
):
    """Value solve made self-consistent with its own boundary position.

    With the delta/gamma guesses and the coupling held fixed, the new
    boundary enters only through the drift coefficient, so the update is a
    scalar fixed point in the boundary alone.  Its plain resubstitution
    contracts too slowly near the expiry singularity; the root of
    ``K - u_0(omega(s)) - s`` is found by secant steps (resubstitution as
    fallback), one tridiagonal solve per evaluation.
    """
    lo, hi = 1e-10 * strike, 2.0 * strike

    def evaluate(s):
        om = omega_coefficient(s, old_m.s_f, grid.k, wm.r, wm.sigma)
        system = assemble_value_system(
            old_m.u, old_m.w, old_m.y, w_guess, y_guess,
            coupling_u, coupling_w, wm.coeffs, om, grid, strike,
            matrix=wm.value_matrix,
        )
        u = fast_solve(system)
        u[-1] = 0.0
        return u, strike - u[0]

    s0 = min(max(s_start, lo), hi)
    u_cur, g0 = evaluate(s0)
    r0 = g0 - s0
    if abs(r0) <= inner_tol:
        return u_cur, g0
    s1 = min(max(g0, lo), hi)
    u_cur, g1 = evaluate(s1)
    r1 = g1 - s1
    for _ in range(max_inner):
        if abs(r1) <= inner_tol:
            break
        denom = r1 - r0
        if denom != 0.0:
            s2 = s1 - r1 * (s1 - s0) / denom
        else:
            s2 = g1
        if not np.isfinite(s2) or s2 <= lo or s2 >= hi:
            s2 = min(max(g1, lo), hi)
        s0, r0 = s1, r1
        u_cur, g1 = evaluate(s2)
        s1, r1 = s2, g1 - s2
    return u_cur, g1


def _anderson_coefficients(df_cols, f_cur):
    """Least-squares mixing weights via regularized normal equations."""
    a = np.column_stack(df_cols)
    ata = a.T @ a
    ata[np.diag_indices_from(ata)] += 1e-12 * (1.0 + np.trace(ata))
    try:
        return np.linalg.solve(ata, a.T @ f_cur)
    except np.linalg.LinAlgError:
        return None


def _gs_group(
    states, group, model, config, work, x_nodes, step, omega_fn, predictor=None
) -> tuple[int, np.ndarray]:
    """Gauss-Seidel iteration of one coupling group over a single step.

    One sweep updates the regimes in order, each consuming the freshest
    foreign iterate: value solve, boundary update from its first entry,
    then the delta/gamma/speed chain with the new boundary.  Iterates are
    Anderson-mixed between sweeps, and the previous step's increment
    (``predictor``) warm-starts the iteration; both only shorten the path
    to the same fixed point.  Convergence is declared when one sweep moves
    no boundary and no value entry by ``epsilon`` or more.

    When the sweep map fails to contract (it can lose contractivity for
    time steps far smaller than ``h^2``), the step is retried with the
    boundary made self-consistent inside every value solve; that variant
    trades sweep-map stability the other way, and the two share their
    fixed point.

    Returns the sweep count and the step increment for the next predictor.
    """
    entry = {m: states[m].copy() for m in group}
    try:
        return _gs_group_once(
            states, group, model, config, work, x_nodes, step, omega_fn,
            predictor, self_consistent=False,
        )
    except NoConvergence:
        for m in group:
            states[m] = entry[m]
        return _gs_group_once(
            states, group, model, config, work, x_nodes, step, omega_fn,
            predictor, self_consistent=True,
        )


def _gs_group_once(
    states, group, model, config, work, x_nodes, step, omega_fn, predictor,
    self_consistent: bool,
) -> tuple[int, np.ndarray]:
    grid = config.grid
    strike = model.strike
    order = config.interpolation
    k = grid.k
    h = grid.h
    n_nodes = grid.M + 1

    old = {m: states[m].copy() for m in group}
    stacks = {m: _Stacks(states[m], h) for m in group}
    boundaries = {m: states[m].s_f for m in group}
    coupling_n = {
        m: _coupling_sum(
            m, stacks, boundaries, old[m].s_f, work, model, grid, order, x_nodes
        )
        for m in group
    }
    inner_tol = max(config.epsilon * 1e-3, 4e-15 * strike)

    def sweep():
        for m in group:
            wm = work[m]
            state = states[m]
            c2 = coupling_n[m]
            if wm.partners:
                c2 = c2 + _coupling_sum(
                    m, stacks, boundaries, state.s_f, work, model, grid,
                    order, x_nodes,
                )
            if self_consistent:
                u_new, s_new = _self_consistent_value_solve(
                    old[m], state.w, state.y, c2[0], c2[1], wm, grid,
                    strike, state.s_f, inner_tol,
                )
            else:
                om = omega_fn(state.s_f, old[m].s_f, k, wm.r, wm.sigma)
                system = assemble_value_system(
                    old[m].u, old[m].w, old[m].y, state.w, state.y,
                    c2[0], c2[1], wm.coeffs, om, grid, strike,
                    matrix=wm.value_matrix,
                )
                u_new = fast_solve(system)
                u_new[-1] = 0.0
                s_new = strike - u_new[0]
            if s_new <= 0.0:
                raise SolveFailure(
                    step, f"boundary of regime {m} collapsed to {s_new}"
                )
            om = omega_fn(s_new, old[m].s_f, k, wm.r, wm.sigma)
            w_new = _solve_derivative(
                old[m].w, u_new + old[m].u, c2[1], wm, om, grid, -s_new
            )
            y_new = _solve_derivative(
                old[m].y, w_new + old[m].w, c2[2], wm, om, grid, -s_new
            )
            z_new = _solve_derivative(
                old[m].z, y_new + old[m].y, c2[3], wm, om, grid, -s_new
            )
            state.u, state.w, state.y, state.z = u_new, w_new, y_new, z_new
            state.s_f = s_new
            stacks[m].refresh(state, h)
            boundaries[m] = s_new

    stride = 4 * n_nodes + 1

    def pack() -> np.ndarray:
        vec = np.empty(stride * len(group))
        for i, m in enumerate(group):
            st = states[m]
            base = i * stride
            vec[base:base + n_nodes] = st.u
            vec[base + n_nodes:base + 2 * n_nodes] = st.w
            vec[base + 2 * n_nodes:base + 3 * n_nodes] = st.y
            vec[base + 3 * n_nodes:base + 4 * n_nodes] = st.z
            vec[base + 4 * n_nodes] = st.s_f
        return vec

    def unpack(vec: np.ndarray):
        for i, m in enumerate(group):
            st = states[m]
            base = i * stride
            st.u = vec[base:base + n_nodes].copy()
            st.w = vec[base + n_nodes:base + 2 * n_nodes].copy()
            st.y = vec[base + 2 * n_nodes:base + 3 * n_nodes].copy()
            st.z = vec[base + 3 * n_nodes:base + 4 * n_nodes].copy()
            st.s_f = float(vec[base + 4 * n_nodes])
            stacks[m].refresh(st, h)
            boundaries[m] = st.s_f

    sf_idx = [i * stride + 4 * n_nodes for i in range(len(group))]
    u_slices = [
        slice(i * stride, i * stride + n_nodes) for i in range(len(group))
    ]
    depth = 3
    lo, hi = 1e-10 * strike, 2.0 * strike
    level_n = pack()

    x_cur = level_n
    if predictor is not None:
        candidate = level_n + predictor
        if np.all((candidate[sf_idx] > lo) & (candidate[sf_idx] < hi)):
            x_cur = candidate
            unpack(x_cur)

    x_hist: list[np.ndarray] = []
    f_hist: list[np.ndarray] = []
    d_sf = d_u = np.inf
    best_residual = np.inf
    stale = 0
    for it in range(1, config.max_iterations + 1):
        sweep()
        gx = pack()
        f_cur = gx - x_cur
        d_sf = max(abs(float(f_cur[i])) for i in sf_idx)
        d_u = max(float(np.max(np.abs(f_cur[s]))) for s in u_slices)
        if d_sf < config.epsilon and d_u < config.epsilon:
            for m in group:
                states[m].s_f_prev = old[m].s_f
            return it, gx - level_n

        # restart the mixing history when it stops making progress
        residual = max(d_sf, d_u)
        if residual < best_residual * 0.999:
            best_residual = residual
            stale = 0
        else:
            stale += 1
            if stale >= 4:
                x_hist.clear()
                f_hist.clear()
                stale = 0

        x_next = gx
        if x_hist:
            gamma = _anderson_coefficients(
                [f_cur - f for f in f_hist], f_cur
            )
            if gamma is not None:
                dx = np.column_stack([x_cur - x for x in x_hist])
                df = np.column_stack([f_cur - f for f in f_hist])
                candidate = gx - (dx + df) @ gamma
                if np.all(np.isfinite(candidate)) and np.all(
                    (candidate[sf_idx] > lo) & (candidate[sf_idx] < hi)
                ):
                    x_next = candidate
        x_hist.append(x_cur)
        f_hist.append(f_cur)
        if len(x_hist) > depth:
            x_hist.pop(0)
            f_hist.pop(0)
        x_cur = x_next
        if x_next is not gx:
            unpack(x_next)
    raise NoConvergence(step, config.max_iterations, d_sf, d_u)


def _newton_group(
    states, group, model, config, work, x_nodes, step, pool, predictor=None
) -> tuple[int, np.ndarray]:
    """Newton iteration of one coupling group over a single step.

    Phase one converges the value arrays and boundaries: the coupling is
    frozen at the previous iterate (refreshed between iterations), delta
    and gamma stay at their stored level-n values, and each regime's
    boundary is driven to consistency through the constant Jacobian.  The
    three derivative chains then converge in the same frozen-coupling
    fashion via residual corrections.  Regimes are independent within an
    iteration, so updates may run in a thread pool.
    """
    grid = config.grid
    strike = model.strike
    order = config.interpolation
    k = grid.k
    h = grid.h

    old = {m: states[m].copy() for m in group}
    stacks = {m: _Stacks(states[m], h) for m in group}
    boundaries = {m: states[m].s_f for m in group}
    coupling_n = {
        m: _coupling_sum(
            m, stacks, boundaries, old[m].s_f, work, model, grid, order, x_nodes
        )
        for m in group
    }
    inner_tol = max(config.epsilon * 1e-3, 4e-15 * strike)

    if predictor is not None:
        for i, m in enumerate(group):
            s_guess = old[m].s_f + predictor[i]
            if 0.0 < s_guess < 2.0 * strike:
                states[m].s_f = s_guess

    def value_update(m):
        c2 = coupling_n[m]
        if work[m].partners:
            c2 = c2 + _coupling_sum(
                m, stacks, boundaries, states[m].s_f, work, model, grid,
                order, x_nodes,
            )
        u_new, s_new = _self_consistent_value_solve(
            old[m], old[m].w, old[m].y, c2[0], c2[1], work[m], grid,
            strike, states[m].s_f, inner_tol,
        )
        return m, u_new, s_new

    prev_sf = {m: old[m].s_f for m in group}
    prev_u = {m: old[m].u.copy() for m in group}
    converged_at = None
    d_sf = d_u = np.inf
    for it in range(1, config.max_iterations + 1):
        updates = list(
            pool.map(value_update, group) if pool is not None
            else map(value_update, group)
        )
        for m, u_new, s_new in updates:
            if s_new <= 0.0:
                raise SolveFailure(
                    step, f"boundary of regime {m} collapsed to {s_new}"
                )
            states[m].u = u_new
            states[m].s_f = s_new
        for m in group:
            stacks[m].values[0] = states[m].u
            boundaries[m] = states[m].s_f
        d_sf = max(abs(states[m].s_f - prev_sf[m]) for m in group)
        d_u = max(float(np.max(np.abs(states[m].u - prev_u[m]))) for m in group)
        if d_sf < config.epsilon and d_u < config.epsilon:
            converged_at = it
            break
        for m in group:
            prev_sf[m] = states[m].s_f
            prev_u[m] = states[m].u.copy()
    if converged_at is None:
        raise NoConvergence(step, config.max_iterations, d_sf, d_u)

    omegas = {
        m: omega_coefficient(states[m].s_f, old[m].s_f, k, work[m].r, work[m].sigma)
        for m in group
    }

    def refresh_slot(m, row, field):
        stacks[m].values[row] = field
        if row >= 1:
            stacks[m].slopes[row - 1] = field
        if row == 3:
            stacks[m].slopes[3] = z_derivative(field, h)

    total_it = converged_at
    for f_name, g_name, row in (("w", "u", 1), ("y", "w", 2), ("z", "y", 3)):
        iterate = {m: getattr(states[m], f_name) for m in group}

        def field_update(m):
            c2_row = coupling_n[m][row]
            if work[m].partners:
                c2_row = c2_row + _coupling_sum(
                    m, stacks, boundaries, states[m].s_f, work, model, grid,
                    order, x_nodes,
                )[row]
            system = assemble_derivative_system(
                getattr(old[m], f_name),
                getattr(states[m], g_name) + getattr(old[m], g_name),
                c2_row, work[m].coeffs, omegas[m], grid, -states[m].s_f,
                matrix=work[m].deriv_matrix,
            )
            f_new = _newton_update(work[m].deriv_matrix, system.rhs, iterate[m])
            f_new[0] = -states[m].s_f
            f_new[-1] = 0.0
            return m, f_new

        for it in range(1, config.max_iterations + 1):
            updates = list(
                pool.map(field_update, group) if pool is not None
                else map(field_update, group)
            )
            d_f = max(
                float(np.max(np.abs(f_new - iterate[m]))) for m, f_new in updates
            )
            for m, f_new in updates:
                iterate[m] = f_new
                setattr(states[m], f_name, f_new)
                refresh_slot(m, row, f_new)
            if d_f < config.epsilon:
                break
        else:
            raise NoConvergence(step, config.max_iterations, 0.0, d_f)
        total_it = max(total_it, it)

    for m in group:
        states[m].s_f_prev = old[m].s_f
    increment = np.array([states[m].s_f - old[m].s_f for m in group])
    return total_it, increment


def _tridiag_matvec(system: TridiagonalSystem, x: np.ndarray) -> np.ndarray:
    out = system.diag * x
    out[:-1] += system.sup[:-1] * x[1:]
    out[1:] += system.sub[1:] * x[:-1]
    return out


def _newton_update(matrix: TridiagonalSystem, rhs: np.ndarray, x_it: np.ndarray):
    """One residual correction ``x - A^{-1}(A x - b)`` through the Jacobian."""
    residual = _tridiag_matvec(matrix, x_it) - rhs
    delta = fast_solve(
        TridiagonalSystem(
            sub=matrix.sub, diag=matrix.diag, sup=matrix.sup, rhs=residual
        )
    )
    return x_it - delta


def gs_time_step(
    states: list[RegimeState],
    model: RegimeModel,
    config: SolverConfig,
    omega_fn=omega_coefficient,
    step: int = 0,
    work: list[_RegimeWork] | None = None,
) -> int:
    """Advance all regimes one step with Gauss-Seidel sweeps (in place).

    Returns the largest sweep count over the independent coupling groups.
    """
    if work is None:
        work = [_RegimeWork(model, config.grid, m) for m in range(model.num_regimes)]
    x_nodes = config.grid.nodes()
    iterations = 0
    for group in coupling_groups(model.generator.entries):
        its, _ = _gs_group(states, group, model, config, work, x_nodes, step, omega_fn)
        iterations = max(iterations, its)
    return iterations


def newton_time_step(
    states: list[RegimeState],
    model: RegimeModel,
    config: SolverConfig,
    step: int = 0,
    work: list[_RegimeWork] | None = None,
    pool: ThreadPoolExecutor | None = None,
) -> int:
    """Advance all regimes one step with Newton corrections (in place)."""
    if work is None:
        work = [_RegimeWork(model, config.grid, m) for m in range(model.num_regimes)]
    x_nodes = config.grid.nodes()
    iterations = 0
    for group in coupling_groups(model.generator.entries):
        its, _ = _newton_group(
            states, group, model, config, work, x_nodes, step, pool
        )
        iterations = max(iterations, its)
    return iterations


def _check_invariants(states, model, step):
    strike = model.strike
    for m, st in enumerate(states):
        if not (0.0 < st.s_f <= strike * (1.0 + 1e-12)):
            raise SolveFailure(step, f"regime {m} boundary {st.s_f} outside (0, K]")
        if abs(st.u[0] + st.s_f - strike) > 1e-10 * max(1.0, strike):
            raise SolveFailure(step, f"regime {m} lost boundary consistency")
        if st.w[0] != -st.s_f or st.y[0] != -st.s_f or st.z[0] != -st.s_f:
            raise SolveFailure(step, f"regime {m} derivative boundary mismatch")
        if st.u[-1] != 0.0 or st.w[-1] != 0.0 or st.y[-1] != 0.0 or st.z[-1] != 0.0:
            raise SolveFailure(step, f"regime {m} far-field values not pinned to zero")


def solve(
    model: RegimeModel,
    config: SolverConfig,
    num_steps: int | None = None,
) -> SolveResult:
    """Run the full horizon from the payoff state.

    ``num_steps`` can cut the horizon short (0 returns the initial state);
    by default all ``N`` steps of the grid are taken.
    """
    grid = config.grid
    n_steps = grid.N if num_steps is None else num_steps
    if not 0 <= n_steps <= grid.N:
        raise ValueError(f"num_steps must lie in [0, {grid.N}]")
    t0 = time.perf_counter()
    states = initial_state(model, grid)
    num_regimes = model.num_regimes
    work = [_RegimeWork(model, grid, m) for m in range(num_regimes)]
    groups = coupling_groups(model.generator.entries)
    x_nodes = grid.nodes()

    boundary = np.full((num_regimes, n_steps + 1), model.strike)
    greeks = [GreeksField.zeros(grid.M + 1) for _ in range(num_regimes)]
    u_hist = [[st.u.copy()] for st in states]
    w_hist = [[st.w.copy()] for st in states]
    y_hist = [[st.y.copy()] for st in states]
    iterations: list[int] = []
    predictors: dict[int, np.ndarray | None] = {
        gi: None for gi in range(len(groups))
    }

    pool = None
    if config.method == "newton" and config.parallel and num_regimes > 1:
        pool = ThreadPoolExecutor(max_workers=min(num_regimes, 8))
    try:
        for n in range(1, n_steps + 1):
            step_its = 0
            for gi, group in enumerate(groups):
                if config.method == "gs":
                    its, delta = _gs_group(
                        states, group, model, config, work, x_nodes, n,
                        omega_coefficient, predictor=predictors[gi],
                    )
                else:
                    its, delta = _newton_group(
                        states, group, model, config, work, x_nodes, n, pool,
                        predictor=predictors[gi],
                    )
                predictors[gi] = delta
                step_its = max(step_its, its)
            iterations.append(step_its)
            _check_invariants(states, model, n)
            for m in range(num_regimes):
                boundary[m, n] = states[m].s_f
                u_hist[m].append(states[m].u.copy())
                w_hist[m].append(states[m].w.copy())
                y_hist[m].append(states[m].y.copy())
                if len(u_hist[m]) > 3:
                    u_hist[m].pop(0)
                    w_hist[m].pop(0)
                    y_hist[m].pop(0)
                greeks[m] = update_time_greeks(
                    u_hist[m], w_hist[m], y_hist[m], grid.k, n
                )
    finally:
        if pool is not None:
            pool.shutdown()

    return SolveResult(
        states=states,
        boundary=BoundaryHistory(values=boundary),
        greeks=greeks,
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        model=model,
        grid=grid,
        config=config,
    )


def price_at_asset(result: SolveResult, S: float, regime: int) -> float:
    """Option price at asset level ``S`` in the given regime.

    Below the boundary the price is the payoff; above it the transformed
    value is Hermite-interpolated at the mapped coordinate, and beyond the
    truncated far field it is zero.
    """
    if not 0 <= regime < result.model.num_regimes:
        raise RegimeOutOfRange(
            f"regime {regime} outside [0, {result.model.num_regimes})"
        )
    if S <= 0.0:
        raise NonpositiveAsset(f"asset price must be positive, got {S}")
    state = result.states[regime]
    strike = result.model.strike
    if S <= state.s_f:
        return strike - S
    grid = result.grid
    x = math.log(S / state.s_f)
    if x >= grid.x_max:
        return 0.0
    j = min(max(int(math.floor(x / grid.h)), 0), grid.M - 1)
    t = x / grid.h - j
    a, b, c, d = cubic_basis(t, grid.h)
    return float(
        a * state.u[j] + b * state.u[j + 1]
        + c * state.w[j] + d * state.w[j + 1]
    )
