"""Maximal solutions via the shrinking-floor ladder, and (non)uniqueness probes.

For non-Lipschitz exponents (p < 1 or l < 1) the problem can admit several
solutions from the same data; the distinguished one is the maximal solution,
reached as the decreasing limit of solutions whose initial data are lifted
to positive floors 1/4, 1/8, ...  Each rung is solved by the fixed-point
iteration; consecutive rungs must come out nodewise ordered (that ordering
is a theorem, so a violation is a solver bug).  The limit is taken by
geometric extrapolation of the rung decrements when their ratio has
stabilized, with the last gap as the error bar otherwise.

Two certificate builders consume the ladder:

* nonuniqueness_certificate -- for zero initial data, witnesses a positive
  source (condition "4.1": c(x0,t0) > 0 somewhere inside with p < 1) or a
  positive boundary kernel (condition "4.2": k(., y0, t0) > 0 at both
  endpoints with l < 1), verifies that zero is a solution, and checks that
  the ladder limit is strictly positive and dominates the matching
  constructed subsolution.  All three evidence legs must pass before a
  certificate is emitted; anything else is reported as inconclusive.

* uniqueness_probe -- computes the solution along three independent routes
  (fixed point on the raw data or the ladder limit, direct time stepping,
  and fixed point on slightly lifted data) and reports the largest pairwise
  divergence, together with which structural hypotheses (persistence
  conditions "4.3"/"4.4", monotone coefficients "4.7") were witnessed.

The condition tags are opaque wire-format codes fixed by the certificate
schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractionError, LadderError, LadderMonotonicityError
from .kernel import NeumannHeatKernel
from .mol import MolConfig, MolResult, mol_solve
from .ordering import (SubsolutionSpec, boundary_layer_subsolution, classify,
                       compare_trajectories, interior_subsolution,
                       positivity_check)
from .picard import PicardConfig, PicardDiagnostics, picard_solve
from .problem import (ENDPOINTS, Grid, ProblemSpec, Trajectory,
                      regularize_initial)

COND_INTERIOR_SOURCE = "4.1"
COND_BOUNDARY_KERNEL = "4.2"
COND_SOURCE_PERSISTS = "4.3"
COND_KERNEL_PERSISTS = "4.4"
COND_MONOTONE_COEFFS = "4.7"

#: Ladder rungs come out ordered up to solver tolerance; beyond this is a bug.
ORDER_SLACK = 1e-8


@dataclass(frozen=True)
class EpsilonLadder:
    """Converged rungs, their decrements, and the extrapolated limit."""

    epsilons: tuple[float, ...]
    rungs: tuple[Trajectory, ...]
    gaps: tuple[float, ...]
    limit: Trajectory
    rate: float | None            # measured decrement ratio when stable
    error_bar: float
    diagnostics: tuple[PicardDiagnostics, ...]


def default_epsilons(count: int, start: float = 0.25,
                     factor: float = 0.5) -> tuple[float, ...]:
    return tuple(start * factor ** m for m in range(count))


def epsilon_ladder(problem: ProblemSpec, count: int, config: PicardConfig,
                   epsilons: Sequence[float] | None = None,
                   kernel: NeumannHeatKernel | None = None) -> EpsilonLadder:
    """Solve the floor-lifted problems and extrapolate their decreasing limit.

    Raises LadderError when a rung fails to converge and
    LadderMonotonicityError when consecutive rungs are unordered beyond
    solver tolerance.
    """
    if count < 3:
        raise ValueError(f"need at least 3 rungs, got {count}")
    eps = tuple(epsilons) if epsilons is not None else default_epsilons(count)
    if any(not (0.0 < e < 1.0) for e in eps) or any(
            eps[i + 1] >= eps[i] for i in range(len(eps) - 1)):
        raise ValueError("epsilons must be strictly decreasing within (0,1)")
    if kernel is None:
        kernel = NeumannHeatKernel.for_grid(problem.grid)

    rungs: list[Trajectory] = []
    diags: list[PicardDiagnostics] = []
    gaps: list[float] = []
    for e in eps:
        datum = regularize_initial(problem, e)
        try:
            traj, diag = picard_solve(problem, kernel, config, datum)
        except ContractionError as err:
            raise LadderError(f"rung epsilon={e:g} did not converge: {err}",
                              epsilon=e, cause=err) from err
        if rungs:
            report = compare_trajectories(rungs[-1], traj, tol=ORDER_SLACK)
            if not report.ordered:
                raise LadderMonotonicityError(
                    f"rung epsilon={e:g} exceeds the previous rung by "
                    f"{-report.min_gap:.3e} at (x={report.where[0]:g}, "
                    f"t={report.where[1]:g})")
            gaps.append(float(np.max(rungs[-1].values - traj.values)))
        rungs.append(traj)
        diags.append(diag)

    rate, limit_values, error_bar = _extrapolate(rungs, gaps)
    limit = Trajectory(problem.grid, np.maximum(limit_values, 0.0))
    return EpsilonLadder(epsilons=eps, rungs=tuple(rungs), gaps=tuple(gaps),
                         limit=limit, rate=rate, error_bar=error_bar,
                         diagnostics=tuple(diags))


def _extrapolate(rungs: list[Trajectory], gaps: list[float]):
    """Continue the rung decrements geometrically when their ratio is stable.

    The decrement ratio is observed per node: the floor-dominated region
    (where the rung only reflects its own epsilon) contracts at the epsilon
    ratio while the genuinely nonlinear region contracts at its own rate,
    and a single global rate would overshoot wherever the limit is tiny.
    """
    last = rungs[-1].values
    ratios = [gaps[i + 1] / gaps[i] for i in range(len(gaps) - 1) if gaps[i] > 0]
    stable = bool(ratios) and 0.0 < ratios[-1] < 0.95
    if len(ratios) >= 2 and abs(ratios[-1] - ratios[-2]) > 0.25 * ratios[-1]:
        stable = False
    if not stable or gaps[-1] == 0.0 or len(rungs) < 3:
        return None, last.copy(), (gaps[-1] if gaps else 0.0)
    d_last = rungs[-2].values - last
    d_prev = rungs[-3].values - rungs[-2].values
    rate = np.divide(d_last, d_prev, out=np.zeros_like(d_last),
                     where=d_prev > 1e-300)
    rate = np.clip(rate, 0.0, 0.95)
    tail = d_last * rate / (1.0 - rate)
    return ratios[-1], last - tail, float(np.max(np.abs(tail)))


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    kind: str                     # "nonuniqueness" | "uniqueness-probe"
    conclusive: bool
    hypotheses: tuple[dict, ...]
    evidence: dict
    failing_stage: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "conclusive": self.conclusive,
            "failing_stage": self.failing_stage,
            "hypotheses": list(self.hypotheses),
            "evidence": self.evidence,
        }


def _witness_interior_source(problem: ProblemSpec) -> dict | None:
    """Sample for condition 4.1: c > 0 at an interior point with p < 1."""
    if not problem.p < 1.0:
        return None
    grid = problem.grid
    xs = grid.nodes[1:-1]
    for t in grid.times[:-1]:
        cvals = problem.c.eval_interior(xs, float(t), grid)
        i = int(np.argmax(cvals))
        if cvals[i] > 0.0:
            return {"condition": COND_INTERIOR_SOURCE, "x0": float(xs[i]),
                    "t0": float(t), "value": float(cvals[i])}
    return None


def _witness_boundary_kernel(problem: ProblemSpec) -> dict | None:
    """Sample for condition 4.2: k(., y0, t0) > 0 at both endpoints, l < 1."""
    if not problem.l < 1.0:
        return None
    grid = problem.grid
    for t in grid.times[:-1]:
        for y_i, y0 in enumerate(grid.domain.boundary):
            vals = [problem.k.eval_boundary(e, np.asarray([y0]), float(t),
                                            grid)[0] for e in ENDPOINTS]
            if min(vals) > 0.0:
                return {"condition": COND_BOUNDARY_KERNEL, "y0": float(y0),
                        "side": ENDPOINTS[y_i], "t0": float(t),
                        "value": float(min(vals))}
    return None


def nonuniqueness_certificate(problem: ProblemSpec, config: PicardConfig,
                              ladder_count: int = 8,
                              epsilons: Sequence[float] | None = None,
                              positivity_from: float | None = None,
                              kernel: NeumannHeatKernel | None = None
                              ) -> tuple[Certificate, EpsilonLadder | None]:
    """Certify that zero data admit both the trivial and a positive solution.

    Requires identically zero initial data.  Emits a conclusive certificate
    only when (i) a growth hypothesis is witnessed, (ii) the zero field
    checks out as a solution, (iii) the ladder limit stays strictly positive
    past the initial layer, and (iv) the limit dominates the constructed
    subsolution matching the witnessed hypothesis.
    """
    if float(np.max(np.abs(problem.u0))) != 0.0:
        raise ValueError("nonuniqueness certificates require u0 == 0")
    grid = problem.grid
    evidence: dict = {}

    hyps = [w for w in (_witness_interior_source(problem),
                        _witness_boundary_kernel(problem)) if w]
    if not hyps:
        return (Certificate("nonuniqueness", False, (), evidence,
                            failing_stage="hypothesis-witness"), None)

    trivial = classify(Trajectory.constant(grid, 0.0), problem, tol=1e-12)
    evidence["trivial_solution"] = trivial.to_dict()
    if not trivial.is_solution:
        return (Certificate("nonuniqueness", False, tuple(hyps), evidence,
                            failing_stage="trivial-solution"), None)

    try:
        ladder = epsilon_ladder(problem, ladder_count, config,
                                epsilons=epsilons, kernel=kernel)
    except (LadderError, LadderMonotonicityError) as err:
        evidence["ladder_error"] = str(err)
        return (Certificate("nonuniqueness", False, tuple(hyps), evidence,
                            failing_stage="ladder"), None)
    evidence["ladder"] = {
        "epsilons": list(ladder.epsilons),
        "gaps": list(ladder.gaps),
        "rate": ladder.rate,
        "error_bar": ladder.error_bar,
        "limit_sup": ladder.limit.sup(),
    }

    t_star = positivity_from if positivity_from is not None else 4.0 * grid.dt
    pos = positivity_check(ladder.limit, t_star)
    evidence["positivity"] = {"from_t": pos.from_t, "min": pos.min_value,
                              "x": pos.x, "t": pos.t}
    if not pos.min_value > 0.0:
        return (Certificate("nonuniqueness", False, tuple(hyps), evidence,
                            failing_stage="positivity"), ladder)

    cmp_tol = max(ORDER_SLACK, ladder.error_bar)
    for w in hyps:
        if w["condition"] == COND_INTERIOR_SOURCE:
            sub = _interior_lower_bound(problem, w)
            if sub is None:
                continue
            report = compare_trajectories(ladder.limit, sub, tol=cmp_tol)
            evidence["interior_lower_bound"] = report.to_dict()
        else:
            spec = SubsolutionSpec.boundary_layer(l=problem.l, side=w["side"],
                                                  t0=w["t0"])
            try:
                layer = boundary_layer_subsolution(spec, problem)
            except Exception as err:  # construction failure is evidence, not a crash
                evidence["boundary_lower_bound_error"] = str(err)
                continue
            report = compare_trajectories(ladder.limit, layer.trajectory,
                                          tol=cmp_tol)
            evidence["boundary_lower_bound"] = {
                **report.to_dict(), "xi0": layer.xi0, "t_end": layer.t_end}
        if not report.ordered:
            return (Certificate("nonuniqueness", False, tuple(hyps), evidence,
                                failing_stage="lower-bound"), ladder)

    return (Certificate("nonuniqueness", True, tuple(hyps), evidence), ladder)


def _interior_lower_bound(problem: ProblemSpec, witness: dict) -> Trajectory | None:
    """Interior subsolution seated on a region where c keeps a floor."""
    grid = problem.grid
    x0, t0, value = witness["x0"], witness["t0"], witness["value"]
    floor = 0.5 * value
    nodes = grid.nodes
    ok = np.ones(grid.n_nodes, dtype=bool)
    for t in grid.times[grid.level_of(t0):]:
        cvals = problem.c.eval_interior(nodes, float(t), grid)
        ok &= cvals >= floor
    i0 = int(np.argmin(np.abs(nodes - x0)))
    if not ok[i0]:
        return None
    lo = i0
    while lo - 1 > 0 and ok[lo - 1]:
        lo -= 1
    hi = i0
    while hi + 1 < grid.n_nodes - 1 and ok[hi + 1]:
        hi += 1
    if hi - lo < 2:
        return None
    region = (max(float(nodes[lo]), 1e-9),
              min(float(nodes[hi]), grid.domain.length - 1e-9))
    spec = SubsolutionSpec.interior(region=region, c0=floor, p=problem.p, t0=t0)
    return interior_subsolution(spec, grid)


# ---------------------------------------------------------------------------
# Uniqueness probes
# ---------------------------------------------------------------------------

@dataclass
class _Route:
    name: str
    trajectory: Trajectory | None = None
    error: str | None = None
    detail: dict = field(default_factory=dict)


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("NLP_THREADS", "1")))
    except ValueError:
        return 1


def _witness_persistence(problem: ProblemSpec) -> list[dict]:
    """Sample the near-t=0 persistence conditions 4.3 and 4.4."""
    grid = problem.grid
    out = []
    if problem.p < 1.0 and not problem.c.is_zero:
        for t in grid.times[:max(2, grid.n_levels // 4)]:
            cvals = problem.c.eval_interior(grid.nodes, float(t), grid)
            if np.max(cvals) > 0.0:
                i = int(np.argmax(cvals))
                out.append({"condition": COND_SOURCE_PERSISTS,
                            "x0": float(grid.nodes[i]), "t0": float(t),
                            "value": float(np.max(cvals))})
                break
    if problem.l < 1.0 and not problem.k.is_zero:
        samples = []
        t_k = grid.dt
        while t_k <= grid.horizon + 1e-15:
            held = False
            for y0 in grid.domain.boundary:
                vals = [problem.k.eval_boundary(e, np.asarray([y0]), t_k,
                                                grid)[0] for e in ENDPOINTS]
                if min(vals) > 0.0:
                    held = True
                    break
            if held:
                samples.append(float(t_k))
            t_k *= 2.0
        if samples:
            out.append({"condition": COND_KERNEL_PERSISTS,
                        "sampled_times": samples})
    return out


def _witness_monotone(problem: ProblemSpec) -> dict:
    """Check coefficients nondecreasing in t on all sampled level pairs."""
    grid = problem.grid
    nodes, times = grid.nodes, grid.times
    monotone = True
    prev_c = problem.c.eval_interior(nodes, float(times[0]), grid)
    prev_k = [problem.k.eval_boundary(e, nodes, float(times[0]), grid)
              for e in ENDPOINTS]
    for t in times[1:]:
        cur_c = problem.c.eval_interior(nodes, float(t), grid)
        if np.min(cur_c - prev_c) < -1e-12:
            monotone = False
            break
        prev_c = cur_c
        for e_i, e in enumerate(ENDPOINTS):
            cur_k = problem.k.eval_boundary(e, nodes, float(t), grid)
            if np.min(cur_k - prev_k[e_i]) < -1e-12:
                monotone = False
                break
            prev_k[e_i] = cur_k
        if not monotone:
            break
    return {"condition": COND_MONOTONE_COEFFS, "holds": monotone,
            "t_bar": float(times[-1])}


def uniqueness_probe(problem: ProblemSpec, config: PicardConfig,
                     cross_tol: float = 5e-3,
                     mol_config: MolConfig | None = None,
                     ladder_count: int = 6,
                     deltas: tuple[float, float] = (1e-3, 5e-4),
                     kernel: NeumannHeatKernel | None = None) -> Certificate:
    """Compare independent solution routes and report their divergence.

    With nontrivial data the routes are: the fixed-point solver on the raw
    data (Lipschitz regime) or the ladder limit (otherwise); the direct
    time stepper; and the fixed-point solver on data lifted by two small
    floors, keeping the smaller lift.  The certificate is conclusive when
    every route completed and the largest pairwise sup divergence is within
    cross_tol; route failures degrade it to a partial certificate.

    With zero data in the non-Lipschitz regime the unique positive solution
    is the maximal one, and a direct stepper necessarily tracks the trivial
    branch (its explicit powers of an identically zero state stay zero), so
    that route is skipped by design.  The evidence becomes: the ladder
    limit, domination by the lifted rungs, and -- when the coefficients are
    nondecreasing in t -- the self time-shift ordering u(.,t) <= u(.,t+tau).
    """
    grid = problem.grid
    if kernel is None:
        kernel = NeumannHeatKernel.for_grid(grid)
    zero_data = float(np.max(np.abs(problem.u0))) == 0.0
    lipschitz = min(problem.p, problem.l) >= 1.0
    positive_branch_mode = zero_data and not lipschitz

    hyps = _witness_persistence(problem)
    hyps.append(_witness_monotone(problem))

    routes = [_Route("fixed-point"), _Route("time-stepper"), _Route("lifted-data")]
    ladder_error_bar = 0.0

    def run_fixed_point(route: _Route):
        nonlocal ladder_error_bar
        if lipschitz and not zero_data:
            traj, diag = picard_solve(problem, kernel, config)
            route.trajectory = traj
            route.detail = {"iterations": diag.iterations}
        else:
            ladder = epsilon_ladder(problem, ladder_count, config, kernel=kernel)
            route.trajectory = ladder.limit
            ladder_error_bar = ladder.error_bar
            route.detail = {"error_bar": ladder.error_bar,
                            "epsilons": list(ladder.epsilons)}

    def run_mol(route: _Route):
        if positive_branch_mode:
            route.detail = {"skipped": "tracks the trivial branch from zero data"}
            return
        result = mol_solve(problem, mol_config or MolConfig())
        if not result.completed:
            raise RuntimeError(f"time stepper stopped: {result.status} "
                               f"{result.message}")
        route.trajectory = result.trajectory
        route.detail = {"status": result.status}

    def run_lifted(route: _Route):
        trajs = []
        for d in deltas:
            datum = regularize_initial(problem, d)
            traj, _ = picard_solve(problem, kernel, config, datum)
            trajs.append(traj)
        gap = float(np.max(np.abs(trajs[0].values - trajs[1].values)))
        route.trajectory = trajs[-1]
        route.detail = {"deltas": list(deltas), "gap": gap}

    tasks = {"fixed-point": run_fixed_point, "time-stepper": run_mol,
             "lifted-data": run_lifted}
    workers = _max_workers()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(tasks[r.name], r): r for r in routes}
            for fut, route in futures.items():
                try:
                    fut.result()
                except Exception as err:
                    route.error = str(err)
    else:
        for route in routes:
            try:
                tasks[route.name](route)
            except Exception as err:
                route.error = str(err)

    evidence: dict = {"routes": {
        r.name: {"error": r.error, **r.detail} for r in routes}}
    fixed_point = routes[0].trajectory
    lifted = routes[2].trajectory

    shift_ok = True
    monotone = next(h for h in hyps if h["condition"] == COND_MONOTONE_COEFFS)
    if zero_data and monotone["holds"] and fixed_point is not None:
        shift_ok = _time_shift_ordered(fixed_point)
        evidence["time_shift_ordered"] = shift_ok

    failures = [r.name for r in routes if r.error is not None]

    if positive_branch_mode:
        dominated = False
        if fixed_point is not None and lifted is not None:
            report = compare_trajectories(
                lifted, fixed_point, tol=max(ORDER_SLACK, ladder_error_bar))
            evidence["lifted_dominates_limit"] = report.to_dict()
            dominated = report.ordered
        conclusive = not failures and dominated and shift_ok
        failing = None
        if failures:
            failing = f"route:{','.join(failures)}"
        elif not dominated:
            failing = "domination"
        elif not shift_ok:
            failing = "time-shift"
        return Certificate("uniqueness-probe", conclusive, tuple(hyps),
                           evidence, failing_stage=failing)

    pairs = {}
    done = [r for r in routes if r.trajectory is not None]
    max_div = math.nan
    if len(done) >= 2:
        divs = []
        for i in range(len(done)):
            for j in range(i + 1, len(done)):
                d = float(np.max(np.abs(done[i].trajectory.values
                                        - done[j].trajectory.values)))
                pairs[f"{done[i].name}|{done[j].name}"] = d
                divs.append(d)
        max_div = max(divs)
    evidence["divergences"] = pairs
    evidence["max_divergence"] = max_div

    conclusive = (not failures and not math.isnan(max_div)
                  and max_div <= cross_tol and shift_ok)
    failing = None
    if failures:
        failing = f"route:{','.join(failures)}"
    elif not shift_ok:
        failing = "time-shift"
    elif not conclusive:
        failing = "divergence"
    return Certificate("uniqueness-probe", conclusive, tuple(hyps), evidence,
                       failing_stage=failing)


def _time_shift_ordered(traj: Trajectory, tol: float = 1e-8) -> bool:
    """u(x,t) <= u(x,t+tau) for a few sampled shifts tau."""
    grid = traj.grid
    for tau_levels in (1, 2, 4):
        if tau_levels >= grid.n_levels:
            break
        shifted = traj.values[tau_levels:]
        base = traj.values[:grid.n_levels - tau_levels]
        if float(np.min(shifted - base)) < -tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Closed-form oracle for spatially uniform source-only problems
# ---------------------------------------------------------------------------

def uniform_blowup_time(u0: float, c0: float, p: float) -> float | None:
    """Blowup time of u' = c0 u^p, u(0) = u0, when one exists."""
    if p > 1.0 and c0 > 0.0 and u0 > 0.0:
        return u0 ** (1.0 - p) / (c0 * (p - 1.0))
    return None


def uniform_exact_value(u0: float, c0: float, p: float, t: float) -> float:
    """Solution of u' = c0 u^p at time t (maximal branch when u0 = 0, p < 1)."""
    if u0 < 0.0 or c0 < 0.0:
        raise ValueError("u0 and c0 must be nonnegative")
    if p == 1.0:
        return u0 * math.exp(c0 * t)
    if u0 == 0.0 and p > 1.0:
        return 0.0
    t_blow = uniform_blowup_time(u0, c0, p)
    if t_blow is not None and t >= t_blow:
        raise ValueError(f"evaluation at t={t} is past the blowup time {t_blow:g}")
    base = u0 ** (1.0 - p) + c0 * (1.0 - p) * t
    return base ** (1.0 / (1.0 - p))


def uniform_exact_trajectory(u0: float, c0: float, p: float,
                             grid: Grid) -> Trajectory:
    """The uniform oracle sampled on a grid (k = 0 problems only)."""
    values = np.empty((grid.n_levels, grid.n_nodes))
    for j, t in enumerate(grid.times):
        values[j] = uniform_exact_value(u0, c0, p, float(t))
    return Trajectory(grid, values)
