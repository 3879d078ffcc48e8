"""Scenario documents and file formats (JSON problems, CSV fields).

A scenario is a JSON document

    {"name": ..., "task": ...,
     "problem": {"L": ..., "p": ..., "l": ...,
                 "c": {"kind": "constant", "value": ...} | {"kind": "table", ...},
                 "k": {...},
                 "u0": {"kind": "constant" | "cosine" | "table", ...},
                 "T": ...,
                 "grid": {"n_cells": ..., "dt": ...}},
     "out_dir": ...,            # optional; CLI --out overrides
     "tolerances": {...}}       # optional per-task overrides

Problem documents round-trip exactly: parsing and re-serializing returns
the identical document.  Trajectory CSV files carry one row per time level
prefixed by t, with node coordinates in a leading comment line, written at
17 significant digits so they re-ingest losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problem import (Coefficient, Grid, IntervalDomain, ProblemSpec,
                      Trajectory, build_grid)

TASKS = ("solve-picard", "solve-mol", "ladder", "nonuniqueness",
         "uniqueness-probe", "kernel-check", "subsolution-demo")


class ScenarioError(ValueError):
    """Malformed scenario document; message pinpoints the offending field."""


@dataclass(frozen=True)
class Scenario:
    name: str
    task: str
    problem: ProblemSpec
    out_dir: str | None = None
    tolerances: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise ScenarioError(f"missing field {key!r} in {context}")
    return doc[key]


def coefficient_from_doc(doc: dict, context: str) -> Coefficient:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ScenarioError(f"{context} must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind == "constant":
        return Coefficient.constant(float(_require(doc, "value", context)))
    if kind in ("separable", "table"):
        payload = {k: v for k, v in doc.items() if k != "kind"}
        return Coefficient(kind=kind, payload=payload)
    raise ScenarioError(f"{context} has unknown kind {kind!r}")


def coefficient_to_doc(coeff: Coefficient) -> dict:
    if coeff.kind == "callable":
        raise ScenarioError("callable coefficients cannot be serialized")
    return {"kind": coeff.kind, **coeff.payload}


def sample_u0(doc: dict, grid: Grid) -> np.ndarray:
    kind = _require(doc, "kind", "u0")
    if kind == "constant":
        return np.full(grid.n_nodes, float(_require(doc, "value", "u0")))
    if kind == "cosine":
        offset = float(doc.get("offset", 0.0))
        amp = float(doc.get("amplitude", 1.0))
        mode = int(doc.get("mode", 1))
        return offset + amp * np.cos(mode * np.pi * grid.nodes
                                     / grid.domain.length)
    if kind == "table":
        values = np.asarray(_require(doc, "values", "u0"), dtype=float)
        if values.shape != (grid.n_nodes,):
            raise ScenarioError(
                f"u0 table has {values.size} values, grid has {grid.n_nodes} nodes")
        return values
    raise ScenarioError(f"u0 has unknown kind {kind!r}")


def problem_from_doc(doc: dict) -> ProblemSpec:
    L = float(_require(doc, "L", "problem"))
    p = float(_require(doc, "p", "problem"))
    l = float(_require(doc, "l", "problem"))
    T = float(_require(doc, "T", "problem"))
    grid_doc = _require(doc, "grid", "problem")
    n_cells = int(_require(grid_doc, "n_cells", "problem.grid"))
    dt = float(_require(grid_doc, "dt", "problem.grid"))
    domain = IntervalDomain(L)
    grid = build_grid(domain, n_cells, dt, T)
    c = coefficient_from_doc(_require(doc, "c", "problem"), "problem.c")
    k = coefficient_from_doc(_require(doc, "k", "problem"), "problem.k")
    u0_doc = _require(doc, "u0", "problem")
    u0 = sample_u0(u0_doc, grid)
    return ProblemSpec(domain=domain, grid=grid, p=p, l=l, c=c, k=k,
                       u0=u0, T=T, u0_doc=dict(u0_doc))


def problem_to_doc(problem: ProblemSpec) -> dict:
    u0_doc = (dict(problem.u0_doc) if problem.u0_doc is not None
              else {"kind": "table", "values": problem.u0.tolist()})
    return {
        "L": problem.domain.length,
        "p": problem.p,
        "l": problem.l,
        "c": coefficient_to_doc(problem.c),
        "k": coefficient_to_doc(problem.k),
        "u0": u0_doc,
        "T": problem.T,
        "grid": {"n_cells": problem.grid.n_cells, "dt": problem.grid.dt},
    }


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path}: invalid JSON at line {err.lineno}, "
                            f"column {err.colno}: {err.msg}") from err
    return scenario_from_doc(doc, default_name=path.stem)


def scenario_from_doc(doc: dict, default_name: str = "scenario") -> Scenario:
    task = _require(doc, "task", "scenario")
    if task not in TASKS:
        raise ScenarioError(f"unknown task {task!r}; expected one of {TASKS}")
    problem = problem_from_doc(_require(doc, "problem", "scenario"))
    return Scenario(
        name=str(doc.get("name", default_name)),
        task=task,
        problem=problem,
        out_dir=doc.get("out_dir"),
        tolerances=dict(doc.get("tolerances", {})),
        document=doc,
    )


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------

def _f(v: float) -> str:
    return f"{v:.17g}"


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    grid = traj.grid
    lines = ["# x," + ",".join(_f(x) for x in grid.nodes)]
    lines.append("t," + ",".join(f"x{i}" for i in range(grid.n_nodes)))
    for j, t in enumerate(grid.times):
        lines.append(_f(t) + "," + ",".join(_f(v) for v in traj.values[j]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (nodes, times, values) exactly as written."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or not lines[0].startswith("# x,"):
        raise ValueError(f"{path}: missing node coordinate header")
    nodes = np.array([float(v) for v in lines[0].split(",")[1:]])
    times, rows = [], []
    for line in lines[2:]:
        cells = line.split(",")
        times.append(float(cells[0]))
        rows.append([float(v) for v in cells[1:]])
    return nodes, np.array(times), np.array(rows)


def trajectory_from_csv(path: str | Path, grid: Grid) -> Trajectory:
    nodes, times, values = read_trajectory_csv(path)
    if nodes.size != grid.n_nodes or times.size != grid.n_levels:
        raise ValueError(f"{path}: shape does not match the grid")
    return Trajectory(grid, values)


def write_diagnostics_csv(diag, path: str | Path) -> None:
    """Per-iteration table: iter, sup_diff, ratio (empty ratio on iter 1)."""
    lines = ["iter,sup_diff,ratio"]
    for i, d in enumerate(diag.sup_diffs):
        ratio = _f(diag.ratios[i - 1]) if i >= 1 else ""
        lines.append(f"{i + 1},{_f(d)},{ratio}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_gains_csv(samples, path: str | Path) -> None:
    """Gain curve samples: t, nu, mu."""
    lines = ["t,nu,mu"]
    for t, nu, mu in samples:
        lines.append(f"{_f(t)},{_f(nu)},{_f(mu)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
