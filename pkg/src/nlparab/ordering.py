"""Residual certificates for sub/supersolutions and comparison checks.

A nonnegative field is a supersolution when all three signed residuals

    interior:  u_t - u_xx - c u^p        >= 0   (interior nodes, all levels)
    boundary:  du/dnu - int k u^l dy     >= 0   (both endpoints, t > 0)
    initial:   u(.,0) - u0               >= 0

and a subsolution when they are all <= 0; a discrete "solution" satisfies
both up to tolerance.  Residuals are formed with centered differences
(one-sided, second order, at the time ends and at the endpoints), so the
certificates are statements about the discretization, and tolerances should
scale with the scheme's consistency error rather than being fixed.

Two families of exact subsolutions are constructed for lower-bound tests
against solutions grown from zero data:

* an interior one, amplitude * (t-t0)^{1/(1-p)} * w(x,t) with w a Dirichlet
  heat solution on a compact subinterval where c has a positive floor; the
  amplitude cap  M0^{-1} [c0 (1-p)]^{1/(1-p)}  makes the interior residual
  nonpositive;
* a boundary-layer one, (t-t0)^alpha (xi0 - s/sqrt(t-t0))_+^3 in the
  distance s to one endpoint, which is a subsolution for small xi0 and
  small t-t0 when the kernel k is positive near that endpoint and l < 1
  (alpha must exceed 1/(1-l)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SubsolutionConstructionError
from .problem import (ENDPOINTS, Grid, ProblemSpec, Trajectory,
                      normal_derivative, quadrature)

VERDICTS = ("solution", "supersolution", "subsolution", "neither")


@dataclass(frozen=True)
class ResidualFields:
    """Signed residuals of one trajectory against one problem.

    interior has shape (n_levels, n_nodes - 2) covering the interior nodes;
    boundary has shape (n_levels - 1, 2) covering t > 0 at (left, right);
    initial has shape (n_nodes,).
    """

    grid: Grid
    interior: np.ndarray
    boundary: np.ndarray
    initial: np.ndarray


@dataclass(frozen=True)
class WorstResidual:
    value: float
    where: tuple

    def as_dict(self) -> dict:
        return {"value": self.value, **dict(self.where)}


@dataclass(frozen=True)
class OrderReport:
    verdict: str
    tolerance: float
    worst_interior: WorstResidual
    worst_boundary: WorstResidual
    worst_initial: WorstResidual
    interior_range: tuple[float, float]
    boundary_range: tuple[float, float]
    initial_range: tuple[float, float]

    @property
    def is_solution(self) -> bool:
        return self.verdict == "solution"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "worst": {
                "interior": self.worst_interior.as_dict(),
                "boundary": self.worst_boundary.as_dict(),
                "initial": self.worst_initial.as_dict(),
            },
        }


def solution_residual(traj: Trajectory, problem: ProblemSpec) -> ResidualFields:
    """Signed residuals of the trajectory in the interior, boundary, initial slots."""
    grid = traj.grid
    u = traj.values
    if grid.n_nodes < 3 or grid.n_levels < 3:
        raise ValueError("residual stencils need at least 3 nodes and 3 levels")

    dt, h = grid.dt, grid.h
    nodes, times = grid.nodes, grid.times

    ut = np.empty_like(u)
    ut[1:-1] = (u[2:] - u[:-2]) / (2.0 * dt)
    ut[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dt)
    ut[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dt)

    uxx = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / h ** 2

    interior = np.empty((grid.n_levels, grid.n_nodes - 2))
    for j in range(grid.n_levels):
        cvals = problem.c.eval_interior(nodes[1:-1], float(times[j]), grid)
        reaction = cvals * np.power(np.maximum(u[j, 1:-1], 0.0), problem.p)
        interior[j] = ut[j, 1:-1] - uxx[j] - reaction

    boundary = np.empty((grid.n_levels - 1, 2))
    for j in range(1, grid.n_levels):
        for e_i, e in enumerate(ENDPOINTS):
            flux = problem.boundary_flux(e, np.maximum(u[j], 0.0), float(times[j]))
            boundary[j - 1, e_i] = normal_derivative(u[j], grid, e) - flux

    initial = u[0] - problem.u0
    return ResidualFields(grid, interior, boundary, initial)


def _worst(arr: np.ndarray, coords: Callable[[tuple], tuple]) -> WorstResidual:
    flat = int(np.argmax(np.abs(arr)))
    idx = np.unravel_index(flat, arr.shape)
    return WorstResidual(float(arr[idx]), coords(idx))


def classify(traj: Trajectory, problem: ProblemSpec, tol: float) -> OrderReport:
    """Threshold the signed residuals into a one-word verdict.

    All residuals >= -tol makes a supersolution, all <= +tol a subsolution,
    both a solution.  Boundary residuals get twice the tolerance: the
    one-sided endpoint stencil dominates the discretization error there.
    """
    res = solution_residual(traj, problem)
    grid = res.grid
    nodes, times = grid.nodes, grid.times

    worst_int = _worst(res.interior, lambda ij: (
        ("x", float(nodes[ij[1] + 1])), ("t", float(times[ij[0]]))))
    worst_bd = _worst(res.boundary, lambda ij: (
        ("side", ENDPOINTS[ij[1]]), ("t", float(times[ij[0] + 1]))))
    worst_init = _worst(res.initial, lambda ij: (("x", float(nodes[ij[0]])),))

    lo_ok = (np.min(res.interior) >= -tol
             and np.min(res.boundary) >= -2.0 * tol
             and np.min(res.initial) >= -tol)
    hi_ok = (np.max(res.interior) <= tol
             and np.max(res.boundary) <= 2.0 * tol
             and np.max(res.initial) <= tol)
    if lo_ok and hi_ok:
        verdict = "solution"
    elif lo_ok:
        verdict = "supersolution"
    elif hi_ok:
        verdict = "subsolution"
    else:
        verdict = "neither"

    return OrderReport(
        verdict=verdict, tolerance=tol,
        worst_interior=worst_int, worst_boundary=worst_bd,
        worst_initial=worst_init,
        interior_range=(float(np.min(res.interior)), float(np.max(res.interior))),
        boundary_range=(float(np.min(res.boundary)), float(np.max(res.boundary))),
        initial_range=(float(np.min(res.initial)), float(np.max(res.initial))),
    )


def scheme_tolerance(grid: Grid, scale: float = 10.0) -> float:
    """Residual tolerance matched to the stencils' consistency order."""
    return scale * (grid.h ** 2 + grid.dt ** 1.5)


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of a nodewise ordering check upper >= lower - tol."""

    ordered: bool
    tolerance: float
    min_gap: float
    where: tuple[float, float]    # (x, t) of the smallest gap

    def to_dict(self) -> dict:
        return {"ordered": self.ordered, "tolerance": self.tolerance,
                "min_gap": self.min_gap,
                "x": self.where[0], "t": self.where[1]}


def compare_trajectories(upper: Trajectory, lower: Trajectory,
                         tol: float = 1e-8) -> ComparisonReport:
    """Check upper >= lower - tol at every node of a shared grid."""
    gu, gl = upper.grid, lower.grid
    if (gu.n_cells != gl.n_cells or gu.n_levels != gl.n_levels
            or abs(gu.dt - gl.dt) > 1e-15 * gu.dt
            or gu.domain.length != gl.domain.length):
        raise ValueError("trajectories live on different grids")
    gap = upper.values - lower.values
    idx = np.unravel_index(int(np.argmin(gap)), gap.shape)
    min_gap = float(gap[idx])
    where = (float(gu.nodes[idx[1]]), float(gu.times[idx[0]]))
    return ComparisonReport(ordered=min_gap >= -tol, tolerance=tol,
                            min_gap=min_gap, where=where)


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    x: float
    t: float
    from_t: float


def positivity_check(traj: Trajectory, from_t: float) -> PositivityReport:
    """Minimum of the field over all nodes at levels with t > from_t."""
    grid = traj.grid
    j0 = int(np.searchsorted(grid.times, from_t, side="right"))
    if j0 >= grid.n_levels:
        raise ValueError(f"no levels after t={from_t} (horizon {grid.horizon})")
    tail = traj.values[j0:]
    idx = np.unravel_index(int(np.argmin(tail)), tail.shape)
    return PositivityReport(
        min_value=float(tail[idx]),
        x=float(grid.nodes[idx[1]]),
        t=float(grid.times[j0 + idx[0]]),
        from_t=from_t,
    )


# ---------------------------------------------------------------------------
# Constructed subsolutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsolutionSpec:
    """Parameters of one constructed subsolution (see module docstring)."""

    kind: str                           # "interior" | "boundary-layer"
    t0: float = 0.0
    # interior kind
    region: tuple[float, float] | None = None
    c0: float | None = None
    p: float | None = None
    seed: Callable[[np.ndarray], np.ndarray] | None = None
    seed_sup: float = 1.0
    amplitude: float | None = None
    # boundary-layer kind
    side: str = "left"
    l: float | None = None
    alpha: float | None = None
    xi0: float = 1.0
    layer_width: float | None = None

    @classmethod
    def interior(cls, region: tuple[float, float], c0: float, p: float,
                 t0: float = 0.0, seed=None, seed_sup: float = 1.0,
                 amplitude: float | None = None) -> "SubsolutionSpec":
        if not (0.0 < p < 1.0):
            raise ValueError(f"interior construction needs 0 < p < 1, got {p}")
        if not c0 > 0:
            raise ValueError(f"coefficient floor must be positive, got {c0}")
        return cls(kind="interior", region=(float(region[0]), float(region[1])),
                   c0=c0, p=p, t0=t0, seed=seed, seed_sup=seed_sup,
                   amplitude=amplitude)

    @classmethod
    def boundary_layer(cls, l: float, side: str = "left", t0: float = 0.0,
                       alpha: float | None = None, xi0: float = 1.0,
                       layer_width: float | None = None) -> "SubsolutionSpec":
        if not (0.0 < l < 1.0):
            raise ValueError(f"layer construction needs 0 < l < 1, got {l}")
        if alpha is None:
            alpha = 1.0 / (1.0 - l) + 1.0
        if alpha <= 1.0 / (1.0 - l):
            raise ValueError(
                f"need alpha > 1/(1-l) = {1.0 / (1.0 - l):g}, got {alpha}")
        if not (0.0 < xi0 <= 1.0):
            raise ValueError(f"xi0 must lie in (0,1], got {xi0}")
        if side not in ENDPOINTS:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        return cls(kind="boundary-layer", l=l, side=side, t0=t0,
                   alpha=alpha, xi0=xi0, layer_width=layer_width)


def amplitude_cap(c0: float, p: float, seed_sup: float) -> float:
    """Largest admissible amplitude for the interior construction."""
    return (c0 * (1.0 - p)) ** (1.0 / (1.0 - p)) / seed_sup


def interior_subsolution(spec: SubsolutionSpec, grid: Grid,
                         n_modes: int = 64) -> Trajectory:
    """Build the interior subsolution on the grid, zero outside its region.

    The seed profile evolves by the Dirichlet heat flow on the subinterval
    (computed by its sine series); the full field is
    amplitude * (t - t0)^{1/(1-p)} * w(x, t).
    """
    if spec.kind != "interior":
        raise ValueError("spec is not of interior kind")
    a, b = spec.region
    if not (0.0 < a < b < grid.domain.length):
        raise ValueError(f"region ({a},{b}) must lie strictly inside the domain")
    width = b - a
    cap = amplitude_cap(spec.c0, spec.p, spec.seed_sup)
    amp = cap if spec.amplitude is None else spec.amplitude
    if amp > cap * (1.0 + 1e-12):
        raise ValueError(f"amplitude {amp:g} exceeds the admissible cap {cap:g}")

    seed = spec.seed or (lambda x: np.sin(np.pi * (x - a) / width))
    coeffs = _sine_coefficients(seed, a, width, n_modes)

    nodes, times = grid.nodes, grid.times
    inside = (nodes >= a - 1e-12) & (nodes <= b + 1e-12)
    xs = nodes[inside]
    phases = np.sin(np.outer(np.arange(1, n_modes + 1) * np.pi / width, xs - a))

    values = np.zeros((grid.n_levels, grid.n_nodes))
    rates = (np.arange(1, n_modes + 1) * np.pi / width) ** 2
    growth = 1.0 / (1.0 - spec.p)
    for j, t in enumerate(times):
        if t <= spec.t0:
            continue
        w = (coeffs * np.exp(-rates * (t - spec.t0))) @ phases
        values[j, inside] = amp * (t - spec.t0) ** growth * np.maximum(w, 0.0)
    return Trajectory(grid, values)


def _sine_coefficients(seed, a: float, width: float, n_modes: int) -> np.ndarray:
    # Simpson on a fine private grid; the seed need not align with the solver grid
    m = 512
    xs = np.linspace(a, a + width, m + 1)
    w = np.full(m + 1, width / m / 3.0)
    w[1:-1:2] *= 4.0
    w[2:-1:2] *= 2.0
    vals = np.asarray(seed(xs), dtype=float)
    modes = np.arange(1, n_modes + 1)
    basis = np.sin(np.outer(modes * np.pi / width, xs - a))
    return (2.0 / width) * (basis @ (w * vals))


@dataclass(frozen=True)
class BoundaryLayerSubsolution:
    trajectory: Trajectory
    xi0: float
    t_end: float                  # last time at which the layer is certified
    halvings: int


def _layer_values(spec: SubsolutionSpec, grid: Grid, xi0: float,
                  t_end: float) -> np.ndarray:
    L = grid.domain.length
    s = grid.nodes if spec.side == "left" else L - grid.nodes
    values = np.zeros((grid.n_levels, grid.n_nodes))
    for j, t in enumerate(grid.times):
        if t <= spec.t0 or t > t_end + 1e-15:
            continue
        z = xi0 - s / math.sqrt(t - spec.t0)
        values[j] = (t - spec.t0) ** spec.alpha * np.clip(z, 0.0, None) ** 3
    return values


def boundary_layer_subsolution(spec: SubsolutionSpec, problem: ProblemSpec,
                               tol: float | None = None,
                               max_halvings: int = 20
                               ) -> BoundaryLayerSubsolution:
    """Find an admissible layer amplitude xi0 by halving.

    For each candidate xi0 the residual check determines the largest time
    window (t0, t_end] on which the field is a certified subsolution of the
    problem; the window shrinks towards t0 as the layer decays relative to
    the endpoint slope, so the first candidate with a nonempty window wins.
    Raises SubsolutionConstructionError with the residual trace when no
    candidate admits a window of at least four time steps.
    """
    if spec.kind != "boundary-layer":
        raise ValueError("spec is not of boundary-layer kind")
    grid = problem.grid
    if tol is None:
        tol = scheme_tolerance(grid)
    delta = spec.layer_width if spec.layer_width is not None \
        else 0.5 * grid.domain.length
    cap = min(grid.horizon, spec.t0 + delta ** 2)

    trace = []
    xi0 = spec.xi0
    for halving in range(max_halvings + 1):
        candidate = _layer_values(spec, grid, xi0, cap)
        t_end = _certified_window(candidate, problem, spec.t0, cap, tol)
        if t_end is not None and t_end - spec.t0 >= 4.0 * grid.dt - 1e-15:
            values = _layer_values(spec, grid, xi0, t_end)
            return BoundaryLayerSubsolution(Trajectory(grid, values), xi0,
                                            t_end, halving)
        trace.append((xi0, t_end))
        xi0 *= 0.5
    raise SubsolutionConstructionError(
        f"no admissible layer amplitude after {max_halvings} halvings", trace)


def _certified_window(values: np.ndarray, problem: ProblemSpec, t0: float,
                      cap: float, tol: float) -> float | None:
    """Largest t_end <= cap with all residuals <= tol on (t0, t_end]."""
    grid = problem.grid
    res = solution_residual(Trajectory(grid, values), problem)
    times = grid.times
    t_end = None
    for j in range(1, grid.n_levels):
        t = float(times[j])
        if t <= t0 or t > cap + 1e-15:
            continue
        # residual rows at this level: interior row j, boundary row j-1
        if (np.max(res.interior[j]) <= tol
                and np.max(res.boundary[j - 1]) <= 2.0 * tol):
            t_end = t
        else:
            break
    return t_end
