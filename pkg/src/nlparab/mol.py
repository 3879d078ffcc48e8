"""Direct finite-difference solver: method of lines with IMEX stepping.

Discretizes the interval problem independently of the integral-equation
route, which makes it the second pathway for uniqueness probes and the
cross-check for the fixed-point solver.

Space: standard three-point Laplacian with ghost nodes at both ends.  The
nonlocal flux g_e(t) = int k(e,y,t) u^l(y,t) dy enters through the ghost
value u_{-1} = u_1 + 2h g_left (mirror for the right end), which keeps the
matrix tridiagonal and the boundary second-order accurate.  The sign makes
the flux an influx: with k = 1, l = 1 and u = 1 on the unit interval the
spatial mean grows at rate 2 (one unit per endpoint).

Time: Crank-Nicolson for diffusion, explicit evaluation at the current
level for the reaction c u^p and the nonlocal flux (implicit treatment of
the flux would densify the system).  A fully explicit variant exists for
order studies; its dt <= h^2/2 stability bound is enforced.

Negative undershoots beyond the configured tolerance abort the run as a
stability failure rather than being clamped: clamping would silently
manufacture the positivity property this suite is supposed to verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .problem import ENDPOINTS, Grid, ProblemSpec, Trajectory

SCHEMES = ("imex-cn", "fully-explicit")


@dataclass(frozen=True)
class MolConfig:
    """Stepping scheme, substep size, blowup cap and undershoot tolerance."""

    scheme: str = "imex-cn"
    dt: float | None = None        # substep; must divide the grid dt
    u_max: float = 1e6
    negativity_tol: float = 1e-10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("substep dt must be positive")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")


@dataclass(frozen=True)
class MolResult:
    # trajectory is truncated before the failed level on non-completed runs,
    # or None when the failure hit within the very first step
    trajectory: Trajectory | None
    status: str                   # completed | blowup | stability-failure
    blowup_time: float | None = None
    message: str = ""

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def detect_blowup(state: np.ndarray, config: MolConfig) -> bool:
    """True when the state escaped the cap or stopped being finite."""
    state = np.asarray(state)
    return bool(not np.all(np.isfinite(state)) or np.max(state) > config.u_max)


class _StepperCache:
    """Banded Crank-Nicolson factors and Laplacian stencil for one grid."""

    def __init__(self, grid: Grid, dt: float):
        n = grid.n_nodes
        h = grid.h
        self.h = h
        self.dt = dt
        mu = 0.5 * dt
        # A u = discrete Laplacian with reflected ghost nodes (flux part separate)
        main = np.full(n, -2.0 / h ** 2)
        off = np.full(n - 1, 1.0 / h ** 2)
        upper = off.copy()
        lower = off.copy()
        upper[0] = 2.0 / h ** 2
        lower[-1] = 2.0 / h ** 2
        self.main, self.upper, self.lower = main, upper, lower
        # banded form of (I - mu*A) for solve_banded
        ab = np.zeros((3, n))
        ab[0, 1:] = -mu * upper
        ab[1, :] = 1.0 - mu * main
        ab[2, :-1] = -mu * lower
        self.ab = ab
        self.mu = mu

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        out = self.main * u
        out[:-1] += self.upper * u[1:]
        out[1:] += self.lower * u[:-1]
        return out


def _flux_vector(problem: ProblemSpec, u: np.ndarray, t: float,
                 h: float) -> np.ndarray:
    """Ghost-node contribution of the nonlocal boundary flux."""
    b = np.zeros_like(u)
    if problem.k.is_zero:
        return b
    ul = np.power(np.maximum(u, 0.0), problem.l)
    grid = problem.grid
    for e_i, e in enumerate(ENDPOINTS):
        ky = problem.k.eval_boundary(e, grid.nodes, t, grid)
        g = float(grid.quad_weights @ (ky * ul))
        b[0 if e_i == 0 else -1] += 2.0 * g / h
    return b


def _reaction(problem: ProblemSpec, u: np.ndarray, t: float) -> np.ndarray:
    if problem.c.is_zero:
        return np.zeros_like(u)
    cvals = problem.c.eval_interior(problem.grid.nodes, t, problem.grid)
    return cvals * np.power(np.maximum(u, 0.0), problem.p)


def _advance(state: np.ndarray, t: float, dt: float, problem: ProblemSpec,
             cache: _StepperCache, scheme: str) -> np.ndarray:
    sources = (_flux_vector(problem, state, t, cache.h)
               + _reaction(problem, state, t))
    if scheme == "fully-explicit":
        return state + dt * (cache.laplacian(state) + sources)
    # Crank-Nicolson on diffusion only; flux and reaction stay at level t
    rhs = state + cache.mu * cache.laplacian(state) + dt * sources
    return solve_banded((1, 1), cache.ab, rhs)


def step_imex(state: np.ndarray, t: float, problem: ProblemSpec,
              config: MolConfig) -> np.ndarray:
    """Advance one grid time step (substepping internally if configured)."""
    grid = problem.grid
    state = np.asarray(state, dtype=float)
    n_sub, dt = _substeps(grid, config)
    cache = _StepperCache(grid, dt)
    for s in range(n_sub):
        state = _advance(state, t + s * dt, dt, problem, cache, config.scheme)
    return state


def _substeps(grid: Grid, config: MolConfig) -> tuple[int, float]:
    if config.dt is None:
        return 1, grid.dt
    n_sub = max(1, int(round(grid.dt / config.dt)))
    if abs(n_sub * config.dt - grid.dt) > 1e-9 * grid.dt:
        raise ValueError(
            f"substep {config.dt} does not divide the grid step {grid.dt}")
    return n_sub, grid.dt / n_sub


def mol_solve(problem: ProblemSpec, config: MolConfig | None = None) -> MolResult:
    """March the scheme to the horizon, watching for blowup and undershoot.

    Returns status "completed", or "blowup" / "stability-failure" with the
    trajectory truncated at the last healthy level; failure is reported
    through the status, not an exception, since hitting the cap is the
    expected outcome near the local-existence boundary.
    """
    config = config or MolConfig()
    grid = problem.grid
    n_sub, dt = _substeps(grid, config)
    if config.scheme == "fully-explicit" and dt > 0.5 * grid.h ** 2 * (1 + 1e-12):
        raise ValueError(
            f"explicit scheme needs dt <= h^2/2 = {0.5 * grid.h ** 2:g}, "
            f"got {dt:g}")
    if config.u_max <= float(np.max(problem.u0)):
        raise ValueError("blowup cap must exceed the initial sup")

    cache = _StepperCache(grid, dt)
    # the undershoot guard mirrors the positivity theorem, whose hypothesis
    # is nonnegative data; signed data (pure heat runs) are exempt
    guard_sign = float(np.min(problem.u0)) >= 0.0
    values = np.empty((grid.n_levels, grid.n_nodes))
    values[0] = problem.u0
    state = np.asarray(problem.u0, dtype=float)
    for j in range(1, grid.n_levels):
        t0 = grid.times[j - 1]
        for s in range(n_sub):
            state = _advance(state, float(t0 + s * dt), dt, problem, cache,
                             config.scheme)
        if detect_blowup(state, config):
            return _truncate(values, grid, j - 1, "blowup",
                             blowup_time=float(grid.times[j]),
                             message=f"cap {config.u_max:g} crossed at "
                                     f"t={grid.times[j]:g}")
        if guard_sign and float(np.min(state)) < -config.negativity_tol:
            return _truncate(values, grid, j - 1, "stability-failure",
                             message=f"undershoot {np.min(state):.3e} at "
                                     f"t={grid.times[j]:g}")
        values[j] = state
    return MolResult(Trajectory(grid, values), "completed")


def _truncate(values: np.ndarray, grid: Grid, last_ok: int, status: str,
              blowup_time: float | None = None, message: str = "") -> MolResult:
    if last_ok < 1:
        # failed within the first step; no valid multi-level trajectory exists
        return MolResult(None, status, blowup_time, message)
    sub = grid.truncated(float(grid.times[last_ok]))
    return MolResult(Trajectory(sub, values[:last_ok + 1]), status,
                     blowup_time, message)
