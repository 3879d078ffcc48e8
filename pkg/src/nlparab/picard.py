"""Fixed-point solver for the boundary-coupled integral equation.

On the interval the initial-boundary value problem is equivalent to the
integral equation

    u(x,t) = int G(x,y;t) d(y) dy
           + int_0^t int G(x,y;t-s) c(y,s) u^p(y,s) dy ds
           + int_0^t sum_e G(x,e;t-s) [int k(e,y,s) u^l(y,s) dy] ds,

where G is the Neumann heat kernel, d the (possibly regularized) initial
datum, and e runs over the two endpoints -- the surface integral of the
boundary term degenerates to a two-point sum in one dimension.

The solver iterates u_{n+1} = F(u_n) from the constant trajectory equal to
the datum floor.  Time integrals use the composite trapezoid over the time
levels with the top sub-interval's kernel gap clamped to dt/2, which keeps
the quadrature away from the kernel's singular zero-gap limit; the sqrt(t)
character of the boundary term degrades the formal O(dt^2) to O(dt^{3/2})
worst case, accepted at desk scale.

Iteration diagnostics record the per-sweep sup differences and their
ratios.  Divergence is detected empirically -- sustained ratios at or above
one combined with no overall progress -- rather than from an a-priori
contraction bound, whose constants are not computable from data.  Ratios
can transiently exceed one for Volterra-type operators and still converge,
so a plain sustained-ratio trigger would misfire; see picard_solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ContractionError
from .kernel import NeumannHeatKernel
from .problem import ENDPOINTS, Grid, ProblemSpec, RegularizedDatum, Trajectory


@dataclass(frozen=True)
class PicardConfig:
    """Stopping and safety parameters for the fixed-point iteration."""

    tolerance: float = 1e-10
    max_iter: int = 300
    sup_bound: float | None = None   # a-priori sup bound the iterates should respect
    horizon: float | None = None     # solve on [0, horizon] instead of the grid's
    stall_ratio: float = 1.0 - 1e-3
    stall_window: int = 5

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class PicardDiagnostics:
    """Per-iteration record of one fixed-point solve."""

    sup_diffs: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    iterate_sups: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    fixed_point_residual: float = math.nan
    achieved_horizon: float = math.nan
    traj_min: float = math.nan
    traj_sup: float = math.nan
    within_bound: bool | None = None
    gain_samples: list[tuple[float, float, float]] = field(default_factory=list)

    def tail_ratio(self, window: int = 3) -> float:
        """Largest ratio over the last few iterations (nan when too short)."""
        if not self.ratios:
            return math.nan
        return max(self.ratios[-window:])


class GainEstimate(NamedTuple):
    """Cumulative amplification available to the two source channels.

    interior = sup_x int_0^t int G(x,y;t-s) c(y,s) dy ds
    boundary = sup_x int_0^t sum_e G(x,e;t-s) [int k(e,y,s) dy] ds
    """

    interior: float
    boundary: float


def _check_cache_layout(kernel: NeumannHeatKernel, grid: Grid):
    """The solver indexes kernel matrices by time-step count; verify that."""
    kg = kernel.grid
    if kg.n_cells != grid.n_cells or kg.domain.length != grid.domain.length:
        raise ValueError("kernel was built for a different spatial grid")
    if abs(kg.dt - grid.dt) > 1e-15 * grid.dt:
        raise ValueError("kernel was built for a different time step")
    if len(kernel.gaps) < grid.n_levels:
        raise ValueError("kernel gap cache does not cover the grid horizon")
    if abs(kernel.gaps[0] - 0.5 * grid.dt) > 1e-12 * grid.dt:
        raise ValueError("kernel cache is missing the clamped half-step gap")


def _volterra_sum(mats: np.ndarray, clamp: np.ndarray, X: np.ndarray,
                  j: int, dt: float) -> np.ndarray:
    """Trapezoid-in-time Volterra sum  dt * sum_k w_k M[j-k] @ X[k].

    mats[m] holds the kernel at gap m*dt (m >= 1); the k = j term would
    need gap zero and uses the clamped half-step matrix instead.
    """
    acc = 0.5 * (mats[j] @ X[0]) + 0.5 * (clamp @ X[j])
    if j >= 2:
        acc = acc + np.einsum("miq,mq->i", mats[1:j][::-1], X[1:j])
    return dt * acc


def apply_integral_operator(history: np.ndarray, datum: np.ndarray,
                            problem: ProblemSpec,
                            kernel: NeumannHeatKernel) -> np.ndarray:
    """One sweep of the integral operator over a full trajectory.

    history[j] supplies u(., t_j) inside the source terms; the result is the
    right-hand side of the integral equation evaluated at every level (the
    level-0 row is the datum itself).  Output is nonnegative whenever the
    inputs are, since every integrand is.
    """
    grid = problem.grid
    _check_cache_layout(kernel, grid)
    history = np.asarray(history, dtype=float)
    datum = np.asarray(datum, dtype=float)
    if history.shape != (grid.n_levels, grid.n_nodes):
        raise ValueError("history shape does not match the grid")

    has_c = not problem.c.is_zero
    has_k = not problem.k.is_zero
    if (has_c or has_k) and float(np.min(history)) < -1e-12:
        raise ValueError("history must be nonnegative when source terms are active")

    mats = kernel.matrices
    clamp = mats[0]
    wq = grid.quad_weights
    nodes, times, dt = grid.nodes, grid.times, grid.dt

    out = np.empty_like(history)
    out[0] = datum
    wd = wq * datum
    for j in range(1, grid.n_levels):
        out[j] = mats[j] @ wd

    if has_c:
        hist = np.maximum(history, 0.0)
        S = np.empty_like(history)
        for k in range(grid.n_levels):
            cvals = problem.c.eval_interior(nodes, float(times[k]), grid)
            S[k] = wq * cvals * np.power(hist[k], problem.p)
        for j in range(1, grid.n_levels):
            out[j] += _volterra_sum(mats, clamp, S, j, dt)

    if has_k:
        hist = np.maximum(history, 0.0)
        F = np.empty((grid.n_levels, 2))
        for k in range(grid.n_levels):
            ul = wq * np.power(hist[k], problem.l)
            for e_i, e in enumerate(ENDPOINTS):
                ky = problem.k.eval_boundary(e, nodes, float(times[k]), grid)
                F[k, e_i] = float(ky @ ul)
        bmats = mats[:, :, [0, -1]]
        for j in range(1, grid.n_levels):
            out[j] += _volterra_sum(bmats, bmats[0], F, j, dt)

    return out


def picard_solve(problem: ProblemSpec, kernel: NeumannHeatKernel,
                 config: PicardConfig,
                 datum: RegularizedDatum | np.ndarray | None = None
                 ) -> tuple[Trajectory, PicardDiagnostics]:
    """Iterate the integral operator to its fixed point.

    With a RegularizedDatum the iteration starts from the constant
    trajectory at the datum's floor; with a plain nodal datum (defaulting
    to the problem's u0) it starts from that field repeated in time.

    Divergence raises ContractionError -- carrying the full sup-difference
    and ratio history -- when ratios stay at or above ``stall_ratio`` for
    ``stall_window`` consecutive sweeps without net progress over the
    window, or when ``max_iter`` sweeps pass without meeting the tolerance.
    Transient ratio spikes above one are tolerated as long as the
    differences keep shrinking overall.
    """
    grid = problem.grid
    if config.horizon is not None:
        problem = problem.with_grid(grid.truncated(config.horizon))
        grid = problem.grid

    if datum is None:
        datum_values = np.asarray(problem.u0, dtype=float)
        current = np.tile(datum_values, (grid.n_levels, 1))
    elif isinstance(datum, RegularizedDatum):
        datum_values = datum.values
        current = np.full((grid.n_levels, grid.n_nodes), datum.epsilon)
    else:
        datum_values = np.asarray(datum, dtype=float)
        current = np.tile(datum_values, (grid.n_levels, 1))

    diag = PicardDiagnostics(achieved_horizon=grid.horizon)
    w = config.stall_window
    for it in range(1, config.max_iter + 1):
        new = apply_integral_operator(current, datum_values, problem, kernel)
        d = float(np.max(np.abs(new - current)))
        if diag.sup_diffs:
            diag.ratios.append(d / diag.sup_diffs[-1] if diag.sup_diffs[-1] > 0
                               else 0.0)
        diag.sup_diffs.append(d)
        diag.iterate_sups.append(float(np.max(np.abs(new))))
        diag.iterations = it
        current = new
        if d <= config.tolerance:
            diag.converged = True
            break
        stalled = (len(diag.ratios) >= w
                   and all(r >= config.stall_ratio for r in diag.ratios[-w:])
                   and d >= diag.sup_diffs[-w - 1])
        if stalled:
            raise ContractionError(
                f"no contraction over {w} sweeps (last ratio "
                f"{diag.ratios[-1]:.4f}); the horizon {grid.horizon:g} is "
                "likely past the local-existence window",
                diag.sup_diffs, diag.ratios)

    if not diag.converged:
        raise ContractionError(
            f"not converged after {config.max_iter} sweeps "
            f"(last sup difference {diag.sup_diffs[-1]:.3e})",
            diag.sup_diffs, diag.ratios)

    residual = apply_integral_operator(current, datum_values, problem, kernel)
    diag.fixed_point_residual = float(np.max(np.abs(residual - current)))
    diag.traj_min = float(np.min(current))
    diag.traj_sup = float(np.max(current))
    if config.sup_bound is not None:
        diag.within_bound = diag.traj_sup <= config.sup_bound + 1e-12
    for j in _sample_levels(grid.n_levels):
        g = _gains_at_level(problem, kernel, j)
        diag.gain_samples.append((float(grid.times[j]), g.interior, g.boundary))

    return Trajectory(grid, current), diag


def _sample_levels(n_levels: int, count: int = 5) -> list[int]:
    js = np.unique(np.linspace(1, n_levels - 1, num=min(count, n_levels - 1),
                               dtype=int))
    return [int(j) for j in js]


def _gains_at_level(problem: ProblemSpec, kernel: NeumannHeatKernel,
                    j: int) -> GainEstimate:
    grid = problem.grid
    if j < 1:
        return GainEstimate(0.0, 0.0)
    mats = kernel.matrices
    clamp = mats[0]
    wq, nodes, times, dt = grid.quad_weights, grid.nodes, grid.times, grid.dt

    interior = 0.0
    if not problem.c.is_zero:
        C = np.empty((j + 1, grid.n_nodes))
        for k in range(j + 1):
            C[k] = wq * problem.c.eval_interior(nodes, float(times[k]), grid)
        interior = float(np.max(_volterra_sum(mats, clamp, C, j, dt)))

    boundary = 0.0
    if not problem.k.is_zero:
        F = np.empty((j + 1, 2))
        for k in range(j + 1):
            for e_i, e in enumerate(ENDPOINTS):
                ky = problem.k.eval_boundary(e, nodes, float(times[k]), grid)
                F[k, e_i] = float(wq @ ky)
        bmats = mats[:, :, [0, -1]]
        boundary = float(np.max(_volterra_sum(bmats, bmats[0], F, j, dt)))

    return GainEstimate(interior, boundary)


def estimate_gains(problem: ProblemSpec, kernel: NeumannHeatKernel,
                   t: float) -> GainEstimate:
    """Interior and boundary gain integrals up to time t (grid-snapped)."""
    return _gains_at_level(problem, kernel, problem.grid.level_of(t))


def find_horizon(bound: float, datum_sup: float, problem: ProblemSpec,
                 kernel: NeumannHeatKernel) -> float:
    """Largest grid time T1 keeping the a-priori bound self-consistent.

    Seeks the largest time level with

        bound^p * interior_gain(t) + bound^l * boundary_gain(t)
            <= bound - datum_sup,

    by bisection over levels.  The left side is nondecreasing in t for
    coefficients that do not decay in time (the regime this horizon
    machinery is used in); bisection assumes that monotonicity.  Returns
    0.0 when no level qualifies, which signals that the bound or the grid
    needs refining.
    """
    if not bound > datum_sup:
        raise ValueError(f"bound {bound} must exceed the datum sup {datum_sup}")
    grid = problem.grid
    target = bound - datum_sup

    def ok(j: int) -> bool:
        g = _gains_at_level(problem, kernel, j)
        return (bound ** problem.p * g.interior
                + bound ** problem.l * g.boundary) <= target

    lo, hi = 1, grid.n_levels - 1
    if not ok(lo):
        return 0.0
    if ok(hi):
        return float(grid.times[hi])
    # invariant: ok(lo) and not ok(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return float(grid.times[lo])
