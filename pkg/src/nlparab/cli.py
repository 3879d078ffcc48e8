"""Command-line front end: scenario runner, kernel checks, theorem demos.

    nlp run <scenario.json> [--out DIR]
    nlp kernel-check --L 1.0 --tmin 1e-3 [--modes M] [--n 400] [--out DIR]
    nlp demo <thm2.2|thm3.1|thm3.2|thm4.1|cor4.3|thm4.4> [--out DIR]

Exit codes: 0 success, 2 for "ran fine but the certificate is inconclusive"
(so CI can tell science outcomes from crashes), 1 for any error.  All
artifacts (trajectory CSV, diagnostics CSV, certificate JSON, SVG plots)
land under the output directory.  NLP_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

from . import maximal, mol, ordering, picard, scenario as scen
from .kernel import NeumannHeatKernel, choose_modes
from .problem import (Coefficient, IntervalDomain, ProblemSpec, Trajectory,
                      build_grid, quadrature, validate_problem)
from .svgplot import line_plot

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlp",
        description="Solve and verify the interval heat problem with a "
                    "nonlinear nonlocal boundary flux.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario", help="path to a scenario JSON document")
    p_run.add_argument("--out", default=None, help="output directory")

    p_kc = sub.add_parser("kernel-check", help="kernel normalization/positivity")
    p_kc.add_argument("--L", type=float, default=1.0)
    p_kc.add_argument("--tmin", type=float, default=1e-3)
    p_kc.add_argument("--modes", type=int, default=None,
                      help="override the automatic mode count")
    p_kc.add_argument("--n", type=int, default=400, help="grid cells")
    p_kc.add_argument("--tol", type=float, default=1e-12)
    p_kc.add_argument("--out", default=None)

    p_demo = sub.add_parser("demo", help="run a canned demonstration")
    p_demo.add_argument("name", choices=sorted(DEMOS))
    p_demo.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "kernel-check":
            return _cmd_kernel_check(args)
        return _cmd_demo(args)
    except scen.ScenarioError as err:
        print(f"scenario error: {err}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as err:  # pragma: no cover - last-resort reporting
        print(f"error: {err}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_ERROR


def _out_dir(base: str | None, fallback: str) -> Path:
    out = Path(base) if base else Path(fallback)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_error(out: Path, stage: str, err: Exception):
    scen.write_json({"error": stage, "type": type(err).__name__,
                     "message": str(err)}, out / "error.json")
    print(f"{stage}: {err}", file=sys.stderr)


def _profile_plot(traj: Trajectory, path: Path, title: str):
    grid = traj.grid
    count = min(5, grid.n_levels)
    levels = np.unique(np.linspace(0, grid.n_levels - 1, count, dtype=int))
    series = [(f"t={grid.times[j]:.4g}", list(grid.nodes),
               list(traj.values[j])) for j in levels]
    line_plot(series, path, title=title, xlabel="x", ylabel="u")


def _sup_plot(traj: Trajectory, path: Path, title: str):
    grid = traj.grid
    sups = np.max(np.abs(traj.values), axis=1)
    line_plot([("sup |u|", list(grid.times), list(sups))], path,
              title=title, xlabel="t", ylabel="sup |u|")


def _picard_config(tols: dict) -> picard.PicardConfig:
    return picard.PicardConfig(
        tolerance=float(tols.get("picard_tol", 1e-10)),
        max_iter=int(tols.get("max_iter", 300)))


def _cmd_run(args) -> int:
    scenario = scen.load_scenario(args.scenario)
    out = _out_dir(args.out or scenario.out_dir, f"nlp-out/{scenario.name}")
    handler = _TASKS[scenario.task]
    return handler(scenario, out)


def _report_validation(problem: ProblemSpec, out: Path) -> list[str]:
    report = validate_problem(problem)
    messages = [str(v) for v in report.violations]
    scen.write_json({"ok": report.ok, "violations": messages},
                    out / "validation.json")
    return messages


def _task_solve_picard(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    _report_validation(problem, out)
    kernel = NeumannHeatKernel.for_grid(problem.grid)
    config = _picard_config(scenario.tolerances)
    try:
        traj, diag = picard.picard_solve(problem, kernel, config)
    except Exception as err:
        _write_error(out, "picard-solve", err)
        return EXIT_ERROR
    scen.write_trajectory_csv(traj, out / "trajectory.csv")
    scen.write_diagnostics_csv(diag, out / "diagnostics.csv")
    scen.write_gains_csv(diag.gain_samples, out / "gains.csv")
    _profile_plot(traj, out / "profiles.svg", f"{scenario.name}: u(x, t)")
    _sup_plot(traj, out / "supnorm.svg", f"{scenario.name}: sup norm")
    scen.write_json({"converged": diag.converged,
                     "iterations": diag.iterations,
                     "fixed_point_residual": diag.fixed_point_residual,
                     "sup": diag.traj_sup}, out / "summary.json")
    return EXIT_OK


def _task_solve_mol(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    _report_validation(problem, out)
    tols = scenario.tolerances
    config = mol.MolConfig(
        scheme=tols.get("scheme", "imex-cn"),
        dt=tols.get("mol_substep"),
        u_max=float(tols.get("u_max", 1e6)))
    result = mol.mol_solve(problem, config)
    scen.write_json({"status": result.status, "blowup_time": result.blowup_time,
                     "message": result.message}, out / "summary.json")
    if result.trajectory is not None:
        scen.write_trajectory_csv(result.trajectory, out / "trajectory.csv")
        _profile_plot(result.trajectory, out / "profiles.svg",
                      f"{scenario.name}: u(x, t)")
        _sup_plot(result.trajectory, out / "supnorm.svg",
                  f"{scenario.name}: sup norm")
    return EXIT_OK if result.completed else EXIT_ERROR


def _task_ladder(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    _report_validation(problem, out)
    tols = scenario.tolerances
    config = _picard_config(tols)
    count = int(tols.get("ladder_count", 8))
    try:
        ladder = maximal.epsilon_ladder(problem, count, config)
    except Exception as err:
        _write_error(out, "ladder", err)
        return EXIT_ERROR
    scen.write_trajectory_csv(ladder.limit, out / "limit.csv")
    scen.write_json({"epsilons": list(ladder.epsilons),
                     "gaps": list(ladder.gaps),
                     "rate": ladder.rate,
                     "error_bar": ladder.error_bar,
                     "limit_sup": ladder.limit.sup()}, out / "ladder.json")
    grid = problem.grid
    final = grid.n_levels - 1
    series = [(f"eps={e:.4g}", list(grid.nodes), list(r.values[final]))
              for e, r in zip(ladder.epsilons, ladder.rungs)]
    series.append(("limit", list(grid.nodes), list(ladder.limit.values[final])))
    line_plot(series, out / "ladder.svg",
              title=f"{scenario.name}: rungs at t={grid.horizon:.4g}",
              xlabel="x", ylabel="u")
    _sup_plot(ladder.limit, out / "supnorm.svg", f"{scenario.name}: limit sup")
    return EXIT_OK


def _task_nonuniqueness(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    _report_validation(problem, out)
    tols = scenario.tolerances
    config = _picard_config(tols)
    try:
        cert, ladder = maximal.nonuniqueness_certificate(
            problem, config,
            ladder_count=int(tols.get("ladder_count", 8)),
            positivity_from=tols.get("positivity_from"))
    except Exception as err:
        _write_error(out, "nonuniqueness", err)
        return EXIT_ERROR
    scen.write_json(cert.to_dict(), out / "certificate.json")
    if ladder is not None:
        scen.write_trajectory_csv(ladder.limit, out / "limit.csv")
        _profile_plot(ladder.limit, out / "profiles.svg",
                      f"{scenario.name}: maximal solution")
    return EXIT_OK if cert.conclusive else EXIT_INCONCLUSIVE


def _task_uniqueness_probe(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    _report_validation(problem, out)
    tols = scenario.tolerances
    config = _picard_config(tols)
    try:
        cert = maximal.uniqueness_probe(
            problem, config,
            cross_tol=float(tols.get("cross_tol", 5e-3)),
            ladder_count=int(tols.get("ladder_count", 6)))
    except Exception as err:
        _write_error(out, "uniqueness-probe", err)
        return EXIT_ERROR
    scen.write_json(cert.to_dict(), out / "certificate.json")
    return EXIT_OK if cert.conclusive else EXIT_INCONCLUSIVE


def _kernel_check_report(L: float, t_min: float, n: int, tol: float,
                         modes: int | None, out: Path) -> tuple[int, float]:
    gaps = sorted({t_min} | {g for g in (1e-3, 1e-2, 1e-1, 1.0) if g >= t_min})
    domain = IntervalDomain(L)
    grid = build_grid(domain, n, dt=2.0 * t_min, T=2.0 * t_min)
    kernel = NeumannHeatKernel.for_grid(grid, t_min=t_min, tol=tol,
                                        gaps=np.asarray(gaps))
    used_modes = modes if modes is not None else kernel.modes

    lines = ["gap,max_norm_error,min_value"]
    worst = 0.0
    for gap in gaps:
        G = kernel.matrix(gap)
        row_ints = G @ grid.quad_weights
        err = float(np.max(np.abs(row_ints - 1.0)))
        worst = max(worst, err)
        lines.append(f"{gap:.17g},{err:.17g},{float(np.min(G)):.17g}")
    (out / "kernel_check.csv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    scen.write_json({"L": L, "t_min": t_min, "modes": used_modes,
                     "worst_norm_error": worst}, out / "kernel_check.json")
    return used_modes, worst


def _task_kernel_check(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    tols = scenario.tolerances
    _, worst = _kernel_check_report(
        problem.domain.length,
        float(tols.get("t_min", 1e-3)),
        problem.grid.n_cells,
        float(tols.get("series_tol", 1e-12)),
        None, out)
    return EXIT_OK if worst <= float(tols.get("norm_tol", 1e-8)) else EXIT_ERROR


def _task_subsolution_demo(scenario: scen.Scenario, out: Path) -> int:
    problem = scenario.problem
    _report_validation(problem, out)
    grid = problem.grid
    tols = scenario.tolerances
    config = _picard_config(tols)
    ladder = maximal.epsilon_ladder(problem, int(tols.get("ladder_count", 6)),
                                    config)
    reports = {}
    series = [("ladder limit", list(grid.nodes),
               list(ladder.limit.values[-1]))]
    if problem.p < 1.0 and not problem.c.is_zero:
        witness = maximal._witness_interior_source(problem)
        sub = maximal._interior_lower_bound(problem, witness) if witness else None
        if sub is not None:
            cmp = ordering.compare_trajectories(ladder.limit, sub,
                                                tol=max(1e-8, ladder.error_bar))
            reports["interior"] = cmp.to_dict()
            series.append(("interior subsolution", list(grid.nodes),
                           list(sub.values[-1])))
    if problem.l < 1.0 and not problem.k.is_zero:
        spec = ordering.SubsolutionSpec.boundary_layer(l=problem.l)
        layer = ordering.boundary_layer_subsolution(spec, problem)
        cmp = ordering.compare_trajectories(ladder.limit, layer.trajectory,
                                            tol=max(1e-8, ladder.error_bar))
        reports["boundary_layer"] = {**cmp.to_dict(), "xi0": layer.xi0,
                                     "t_end": layer.t_end}
        j = grid.level_of(layer.t_end)
        series.append((f"layer at t={grid.times[j]:.4g}", list(grid.nodes),
                       list(layer.trajectory.values[j])))
    scen.write_json(reports, out / "subsolutions.json")
    line_plot(series, out / "subsolutions.svg",
              title=f"{scenario.name}: lower bounds", xlabel="x", ylabel="u")
    ok = all(r.get("ordered", False) for r in reports.values()) and reports
    return EXIT_OK if ok else EXIT_INCONCLUSIVE


_TASKS = {
    "solve-picard": _task_solve_picard,
    "solve-mol": _task_solve_mol,
    "ladder": _task_ladder,
    "nonuniqueness": _task_nonuniqueness,
    "uniqueness-probe": _task_uniqueness_probe,
    "kernel-check": _task_kernel_check,
    "subsolution-demo": _task_subsolution_demo,
}


def _cmd_kernel_check(args) -> int:
    out = _out_dir(args.out, "nlp-out/kernel-check")
    used_modes, worst = _kernel_check_report(args.L, args.tmin, args.n,
                                             args.tol, args.modes, out)
    print(f"modes={used_modes} worst normalization error={worst:.3e}")
    return EXIT_OK if worst <= 1e-8 else EXIT_ERROR


# ---------------------------------------------------------------------------
# Canned demos, one per verified statement
# ---------------------------------------------------------------------------

def _demo_problem(p: float, l: float, c, k, u0, T: float, n_cells: int = 32,
                  dt: float = 5e-3, L: float = 1.0) -> ProblemSpec:
    domain = IntervalDomain(L)
    grid = build_grid(domain, n_cells, dt, T)
    u0_doc = u0 if isinstance(u0, dict) else {"kind": "constant", "value": u0}
    return ProblemSpec(domain=domain, grid=grid, p=p, l=l,
                       c=Coefficient.constant(c) if np.isscalar(c) else c,
                       k=Coefficient.constant(k) if np.isscalar(k) else k,
                       u0=scen.sample_u0(u0_doc, grid), T=T, u0_doc=u0_doc)


def _demo_comparison(out: Path) -> int:
    """Ordered initial data stay ordered along the direct solver."""
    base = _demo_problem(p=2.0, l=2.0, c=0.5, k=0.25,
                         u0={"kind": "cosine", "offset": 1.0,
                             "amplitude": 0.25}, T=0.05, n_cells=40, dt=1e-4)
    upper = _demo_problem(p=2.0, l=2.0, c=0.5, k=0.25,
                          u0={"kind": "cosine", "offset": 1.3,
                              "amplitude": 0.25}, T=0.05, n_cells=40, dt=1e-4)
    res_lo = mol.mol_solve(base)
    res_hi = mol.mol_solve(upper)
    report = ordering.compare_trajectories(res_hi.trajectory,
                                           res_lo.trajectory, tol=1e-8)
    scen.write_json(report.to_dict(), out / "comparison.json")
    grid = base.grid
    final = grid.n_levels - 1
    line_plot([("upper", list(grid.nodes), list(res_hi.trajectory.values[final])),
               ("lower", list(grid.nodes), list(res_lo.trajectory.values[final]))],
              out / "comparison.svg", title="ordered data, ordered solutions",
              xlabel="x", ylabel="u")
    return EXIT_OK if report.ordered else EXIT_INCONCLUSIVE


def _demo_local_existence(out: Path) -> int:
    """Short-horizon contraction with the a-priori bound respected."""
    problem = _demo_problem(p=0.5, l=1.0, c=1.0, k=0.0, u0=1.0, T=1.0,
                            n_cells=8, dt=5e-3)
    kernel = NeumannHeatKernel.for_grid(problem.grid)
    bound = 2.0
    horizon = picard.find_horizon(bound, float(np.max(problem.u0)), problem,
                                  kernel)
    config = picard.PicardConfig(tolerance=1e-10, max_iter=200,
                                 sup_bound=bound, horizon=horizon)
    traj, diag = picard.picard_solve(problem, kernel, config)
    scen.write_diagnostics_csv(diag, out / "diagnostics.csv")
    scen.write_trajectory_csv(traj, out / "trajectory.csv")
    scen.write_json({"horizon": horizon, "iterations": diag.iterations,
                     "tail_ratio": diag.tail_ratio(),
                     "within_bound": diag.within_bound}, out / "summary.json")
    _sup_plot(traj, out / "supnorm.svg", "local solution sup norm")
    return EXIT_OK if diag.converged else EXIT_ERROR


def _nonuniqueness_problem(T: float = 1.0) -> ProblemSpec:
    return _demo_problem(p=0.5, l=1.0, c=1.0, k=0.0, u0=0.0, T=T,
                         n_cells=8, dt=5e-3)


def _demo_ladder(out: Path) -> int:
    """Monotone rungs decreasing to the maximal solution."""
    problem = _nonuniqueness_problem()
    config = picard.PicardConfig(tolerance=1e-10, max_iter=400)
    ladder = maximal.epsilon_ladder(problem, count=8, config=config)
    grid = problem.grid
    final = grid.n_levels - 1
    series = [(f"eps={e:.4g}", list(grid.nodes), list(r.values[final]))
              for e, r in zip(ladder.epsilons, ladder.rungs)]
    series.append(("limit", list(grid.nodes), list(ladder.limit.values[final])))
    line_plot(series, out / "ladder.svg",
              title="shrinking-floor ladder at the horizon", xlabel="x",
              ylabel="u")
    exact = maximal.uniform_exact_value(0.0, 1.0, 0.5, grid.horizon)
    limit_end = float(ladder.limit.values[final, grid.n_cells // 2])
    scen.write_json({"epsilons": list(ladder.epsilons),
                     "gaps": list(ladder.gaps), "rate": ladder.rate,
                     "limit_at_horizon": limit_end,
                     "exact_at_horizon": exact}, out / "ladder.json")
    return EXIT_OK if abs(limit_end - exact) < 1e-2 else EXIT_INCONCLUSIVE


def _demo_nonuniqueness(out: Path) -> int:
    problem = _nonuniqueness_problem()
    config = picard.PicardConfig(tolerance=1e-10, max_iter=400)
    cert, ladder = maximal.nonuniqueness_certificate(problem, config,
                                                     ladder_count=10)
    scen.write_json(cert.to_dict(), out / "certificate.json")
    if ladder is not None:
        scen.write_trajectory_csv(ladder.limit, out / "limit.csv")
        _sup_plot(ladder.limit, out / "supnorm.svg",
                  "nontrivial solution from zero data")
    return EXIT_OK if cert.conclusive else EXIT_INCONCLUSIVE


def _demo_positive_uniqueness(out: Path) -> int:
    problem = _nonuniqueness_problem()
    config = picard.PicardConfig(tolerance=1e-10, max_iter=400)
    cert = maximal.uniqueness_probe(problem, config, ladder_count=8)
    scen.write_json(cert.to_dict(), out / "certificate.json")
    return EXIT_OK if cert.conclusive else EXIT_INCONCLUSIVE


def _demo_route_agreement(out: Path) -> int:
    problem = _demo_problem(p=0.5, l=1.0, c=1.0, k=0.0, u0=1.0, T=1.0,
                            n_cells=8, dt=1e-3)
    config = picard.PicardConfig(tolerance=1e-10, max_iter=400)
    cert = maximal.uniqueness_probe(problem, config, cross_tol=5e-3,
                                    ladder_count=8)
    scen.write_json(cert.to_dict(), out / "certificate.json")
    return EXIT_OK if cert.conclusive else EXIT_INCONCLUSIVE


DEMOS = {
    "thm2.2": _demo_comparison,
    "thm3.1": _demo_local_existence,
    "thm3.2": _demo_ladder,
    "thm4.1": _demo_nonuniqueness,
    "cor4.3": _demo_positive_uniqueness,
    "thm4.4": _demo_route_agreement,
}


def _cmd_demo(args) -> int:
    out = _out_dir(args.out, f"nlp-out/demo-{args.name}")
    code = DEMOS[args.name](out)
    print(f"demo {args.name}: exit {code}; artifacts in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
