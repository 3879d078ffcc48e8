"""Problem data for the interval initial-boundary value problem.

The model solved and verified by this package is

    u_t = u_xx + c(x,t) u^p          on (0, L) x (0, T],
    du/dnu = int_0^L k(x,y,t) u^l(y,t) dy   at x in {0, L},
    u(x,0) = u0(x),

with p, l > 0 and nonnegative data c, k, u0.  ``du/dnu`` is the outward
normal derivative, i.e. -u_x at the left endpoint and +u_x at the right.
A classical solution additionally requires the initial datum to satisfy the
boundary condition at t = 0 (the compatibility condition); this module
validates it and can repair it with a localized slope corrector when the
datum is shifted by a positive floor.

Everything here is an immutable value type plus pure functions; all grids
are uniform tensor grids in space and time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import RegularizationError

#: Slack allowed below zero when checking nonnegativity of sampled data.
NONNEG_SLACK = -1e-12

#: Default tolerance for the compatibility residual at the endpoints.
COMPAT_TOL = 1e-8

ENDPOINTS = ("left", "right")


@dataclass(frozen=True)
class IntervalDomain:
    """The spatial domain (0, L) with its two-point boundary."""

    length: float

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"interval length must be positive, got {self.length}")

    @property
    def boundary(self) -> tuple[float, float]:
        return (0.0, self.length)

    def outward_normal(self, endpoint: str) -> float:
        """-1 at the left endpoint, +1 at the right."""
        return -1.0 if _endpoint_index(endpoint) == 0 else 1.0


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid on [0, L] x [0, T].

    Nodes are x_i = i*h with h = L/n_cells (endpoints included); time levels
    are t_j = j*dt.  Fields sampled on the grid are stored time-major:
    ``values[j, i]`` is the value at (x_i, t_j).
    """

    domain: IntervalDomain
    n_cells: int
    dt: float
    n_levels: int

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValueError(f"need at least 4 cells, got {self.n_cells}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_levels < 2:
            raise ValueError(f"need at least 2 time levels, got {self.n_levels}")

    @property
    def h(self) -> float:
        return self.domain.length / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.domain.length, self.n_nodes)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_levels)

    @property
    def horizon(self) -> float:
        return self.dt * (self.n_levels - 1)

    @property
    def quad_weights(self) -> np.ndarray:
        """Weights of the spatial quadrature rule (Simpson, see quadrature)."""
        return _quad_weights(self.n_cells, self.h)

    def level_of(self, t: float) -> int:
        """Index of the time level nearest to t (must be within a half step)."""
        j = int(round(t / self.dt))
        if j < 0 or j >= self.n_levels or abs(t - j * self.dt) > 0.5 * self.dt + 1e-12:
            raise ValueError(f"time {t} outside grid (horizon {self.horizon})")
        return j

    def truncated(self, t_end: float) -> "Grid":
        """Sub-grid with the same spacing covering [0, t_end]."""
        j = self.level_of(t_end)
        if j < 1:
            raise ValueError(f"cannot truncate grid to {t_end}: below one step")
        return replace(self, n_levels=j + 1)


def build_grid(domain: IntervalDomain, n_cells: int, dt: float, T: float) -> Grid:
    """Uniform tensor grid on [0, L] x [0, T].

    The number of steps is T/dt rounded to the nearest integer, so the last
    time level is within dt/2 of the requested horizon.
    """
    if n_cells < 4:
        raise ValueError(f"need at least 4 cells, got {n_cells}")
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if not (T >= dt):
        raise ValueError(f"horizon {T} shorter than one step {dt}")
    n_steps = max(1, int(round(T / dt)))
    return Grid(domain=domain, n_cells=n_cells, dt=dt, n_levels=n_steps + 1)


def _quad_weights(n_cells: int, h: float) -> np.ndarray:
    """Composite Simpson weights; plain trapezoid when the cell count is odd."""
    n = n_cells + 1
    w = np.empty(n)
    if n_cells % 2 == 0:
        w[0::2] = 2.0
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
    else:
        w[:] = h
        w[0] = w[-1] = 0.5 * h
    return w


def quadrature(values: np.ndarray, grid: Grid) -> float:
    """Integral of a nodal field over the interval.

    Composite Simpson on an even number of cells (exact for cubics),
    composite trapezoid otherwise.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ValueError(
            f"field has {values.shape} values, grid has {grid.n_nodes} nodes"
        )
    return float(grid.quad_weights @ values)


def normal_derivative(values: np.ndarray, grid: Grid, endpoint: str) -> float:
    """Outward normal derivative of a nodal field at one endpoint.

    Second-order one-sided stencil (exact for quadratics).  At the left
    endpoint the outward normal points in -x, so the result is -u_x(0);
    at the right it is +u_x(L).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 3:
        raise ValueError("normal derivative needs a field on at least 3 nodes")
    h = grid.h
    if _endpoint_index(endpoint) == 0:
        ux = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
        return -ux
    ux = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return ux


def _endpoint_index(endpoint: str) -> int:
    try:
        return ENDPOINTS.index(endpoint)
    except ValueError:
        raise ValueError(f"endpoint must be 'left' or 'right', got {endpoint!r}")


# ---------------------------------------------------------------------------
# Coefficients c(x,t) and k(x,y,t)
# ---------------------------------------------------------------------------

def _eval_profile(spec: dict, s: np.ndarray, length: float) -> np.ndarray:
    """Evaluate a declarative 1-D profile at coordinates s."""
    kind = spec.get("kind")
    if kind == "constant":
        return np.full_like(np.asarray(s, dtype=float), float(spec["value"]))
    if kind == "cosine":
        offset = float(spec.get("offset", 0.0))
        amp = float(spec.get("amplitude", 1.0))
        mode = int(spec.get("mode", 1))
        return offset + amp * np.cos(mode * np.pi * np.asarray(s, dtype=float) / length)
    if kind == "linear":
        a = float(spec.get("offset", 0.0))
        b = float(spec.get("slope", 0.0))
        return a + b * np.asarray(s, dtype=float)
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class Coefficient:
    """Tagged description of c(x,t) or k(x,y,t).

    Supported kinds:

    * ``constant`` -- a single value.
    * ``separable`` -- product of declarative 1-D profiles in each argument
      (``space`` and ``time`` for c; ``space``, ``space2`` and ``time``
      for k, where ``space`` is evaluated at the boundary point x and
      ``space2`` at the integration variable y).
    * ``table`` -- values tabulated on the grid, time-major; linear
      interpolation in t between levels.
    * ``callable`` -- arbitrary function; not serializable.

    Evaluation is deterministic and vectorized over the space argument.
    """

    kind: str
    payload: dict = field(default_factory=dict)
    fn: Callable | None = None

    @classmethod
    def constant(cls, value: float) -> "Coefficient":
        return cls(kind="constant", payload={"value": float(value)})

    @classmethod
    def zero(cls) -> "Coefficient":
        return cls.constant(0.0)

    @classmethod
    def separable(cls, space: dict, time: dict | None = None,
                  space2: dict | None = None) -> "Coefficient":
        payload = {"space": dict(space)}
        if time is not None:
            payload["time"] = dict(time)
        if space2 is not None:
            payload["space2"] = dict(space2)
        return cls(kind="separable", payload=payload)

    @classmethod
    def table(cls, values: np.ndarray) -> "Coefficient":
        return cls(kind="table", payload={"values": np.asarray(values, dtype=float).tolist()})

    @classmethod
    def from_callable(cls, fn: Callable) -> "Coefficient":
        return cls(kind="callable", fn=fn)

    @property
    def is_zero(self) -> bool:
        """True when the coefficient is identically zero by construction."""
        if self.kind == "constant":
            return self.payload["value"] == 0.0
        if self.kind == "table":
            return not np.any(np.asarray(self.payload["values"]))
        return False

    def _time_factor(self, t: float, length: float) -> float:
        spec = self.payload.get("time")
        if spec is None:
            return 1.0
        return float(_eval_profile(spec, np.asarray([t]), length)[0])

    def eval_interior(self, x: np.ndarray, t: float, grid: Grid) -> np.ndarray:
        """c(x, t) for nodal x (vectorized over x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self.payload["value"])
        if self.kind == "separable":
            sp = _eval_profile(self.payload["space"], x, grid.domain.length)
            return sp * self._time_factor(t, grid.horizon if grid.horizon > 0 else 1.0)
        if self.kind == "table":
            return self._table_at(t, grid, x)
        if self.kind == "callable":
            return np.asarray(self.fn(x, t), dtype=float)
        raise ValueError(f"unknown coefficient kind {self.kind!r}")

    def eval_boundary(self, endpoint: str, y: np.ndarray, t: float,
                      grid: Grid) -> np.ndarray:
        """k(x_e, y, t) for a boundary point x_e and nodal y."""
        y = np.asarray(y, dtype=float)
        e = _endpoint_index(endpoint)
        if self.kind == "constant":
            return np.full(y.shape, self.payload["value"])
        if self.kind == "separable":
            xb = grid.domain.boundary[e]
            fx = float(_eval_profile(self.payload["space"], np.asarray([xb]),
                                     grid.domain.length)[0])
            fy = (_eval_profile(self.payload["space2"], y, grid.domain.length)
                  if "space2" in self.payload else np.ones_like(y))
            return fx * fy * self._time_factor(t, grid.horizon if grid.horizon > 0 else 1.0)
        if self.kind == "table":
            return self._table_at(t, grid, y, endpoint_index=e)
        if self.kind == "callable":
            xb = grid.domain.boundary[e]
            return np.asarray(self.fn(xb, y, t), dtype=float)
        raise ValueError(f"unknown coefficient kind {self.kind!r}")

    def _table_at(self, t: float, grid: Grid, x: np.ndarray,
                  endpoint_index: int | None = None) -> np.ndarray:
        values = np.asarray(self.payload["values"], dtype=float)
        if endpoint_index is not None:
            values = values[endpoint_index]
        # rows are time levels; interpolate linearly between them
        s = t / grid.dt
        j0 = min(int(math.floor(s)), values.shape[0] - 1)
        j1 = min(j0 + 1, values.shape[0] - 1)
        frac = min(max(s - j0, 0.0), 1.0)
        row = (1.0 - frac) * values[j0] + frac * values[j1]
        if row.shape != x.shape:
            row = np.interp(x, grid.nodes, row)
        return row


# ---------------------------------------------------------------------------
# Problem specification and validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one initial-boundary value problem instance."""

    domain: IntervalDomain
    grid: Grid
    p: float
    l: float
    c: Coefficient
    k: Coefficient
    u0: np.ndarray
    T: float
    u0_doc: dict | None = None  # declarative form of u0, kept for round-trips

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"u0 has {u0.shape} values, grid has {self.grid.n_nodes} nodes"
            )
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)

    def with_grid(self, grid: Grid) -> "ProblemSpec":
        """Same problem data on a time-truncated copy of the grid."""
        if grid.n_cells != self.grid.n_cells:
            raise ValueError("spatial resolution must not change")
        return replace(self, grid=grid, T=grid.horizon)

    def boundary_flux(self, endpoint: str, field: np.ndarray, t: float) -> float:
        """The nonlocal flux int k(x_e, y, t) field(y)^l dy at one endpoint."""
        ky = self.k.eval_boundary(endpoint, self.grid.nodes, t, self.grid)
        return float(self.grid.quad_weights @ (ky * np.power(field, self.l)))


@dataclass(frozen=True)
class Trajectory:
    """A space-time field on the grid: values[j, i] = u(x_i, t_j)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.grid.n_levels, self.grid.n_nodes)
        if values.shape != expected:
            raise ValueError(f"trajectory shape {values.shape} != grid shape {expected}")
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory contains nonfinite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Trajectory":
        return cls(grid, np.full((grid.n_levels, grid.n_nodes), float(value)))

    @classmethod
    def from_initial(cls, grid: Grid, datum: np.ndarray) -> "Trajectory":
        """Trajectory that repeats the initial field at every level."""
        return cls(grid, np.tile(np.asarray(datum, dtype=float), (grid.n_levels, 1)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at_time(self, t: float) -> np.ndarray:
        return self.values[self.grid.level_of(t)]

    def shifted(self, tau_levels: int) -> np.ndarray:
        """Values advanced by tau_levels steps (valid rows only)."""
        if tau_levels < 0 or tau_levels >= self.grid.n_levels:
            raise ValueError("shift outside grid")
        return self.values[tau_levels:]


@dataclass(frozen=True)
class Violation:
    """One failed hypothesis with a human-readable location."""

    message: str

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class ValidationReport:
    problem: ProblemSpec
    violations: tuple[Violation, ...]
    compat_residuals: tuple[float, float]

    @property
    def ok(self) -> bool:
        return not self.violations


def compatibility_residual(u0: np.ndarray, k: Coefficient, l: float,
                           grid: Grid) -> tuple[float, float]:
    """Mismatch between du0/dnu and the nonlocal flux at t = 0.

    Returns the residual at (left, right).  Zero residual at both endpoints
    is what a classical solution requires of its initial datum.
    """
    u0 = np.asarray(u0, dtype=float)
    if np.min(u0) < NONNEG_SLACK:
        raise ValueError("u0 must be nonnegative")
    ul = np.power(np.maximum(u0, 0.0), l)
    out = []
    for e in ENDPOINTS:
        ky = k.eval_boundary(e, grid.nodes, 0.0, grid)
        flux = float(grid.quad_weights @ (ky * ul))
        out.append(normal_derivative(u0, grid, e) - flux)
    return (out[0], out[1])


def validate_problem(spec: ProblemSpec, tol: float = COMPAT_TOL) -> ValidationReport:
    """Check the sign and compatibility hypotheses on all grid samples.

    Returns a report rather than raising: the caller decides whether a
    violation is fatal.  Checks: p, l > 0; c, k, u0 nonnegative at every
    sampled point; compatibility residual within tol at both endpoints.
    """
    violations: list[Violation] = []
    grid = spec.grid
    nodes, times = grid.nodes, grid.times

    if not spec.p > 0:
        violations.append(Violation(f"exponent p must be positive, got {spec.p}"))
    if not spec.l > 0:
        violations.append(Violation(f"exponent l must be positive, got {spec.l}"))

    i_bad = np.flatnonzero(spec.u0 < NONNEG_SLACK)
    if i_bad.size:
        i = i_bad[0]
        violations.append(Violation(f"u0 negative at x={nodes[i]:g}: {spec.u0[i]:g}"))

    for t in times:
        cvals = spec.c.eval_interior(nodes, float(t), grid)
        i_bad = np.flatnonzero(cvals < NONNEG_SLACK)
        if i_bad.size:
            i = i_bad[0]
            violations.append(
                Violation(f"c negative at ({nodes[i]:g},{t:g}): {cvals[i]:g}"))
            break
    for e in ENDPOINTS:
        stop = False
        for t in times:
            kvals = spec.k.eval_boundary(e, nodes, float(t), grid)
            i_bad = np.flatnonzero(kvals < NONNEG_SLACK)
            if i_bad.size:
                i = i_bad[0]
                violations.append(Violation(
                    f"k negative at ({e},{nodes[i]:g},{t:g}): {kvals[i]:g}"))
                stop = True
                break
        if stop:
            break

    if violations:
        # sign violations make the flux integral meaningless; skip compatibility
        return ValidationReport(spec, tuple(violations), (math.nan, math.nan))

    res = compatibility_residual(spec.u0, spec.k, spec.l, grid)
    for e, r in zip(ENDPOINTS, res):
        if abs(r) > tol:
            violations.append(
                Violation(f"compatibility residual {r:g} at {e} endpoint"))
    return ValidationReport(spec, tuple(violations), res)


# ---------------------------------------------------------------------------
# Regularized initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularizedDatum:
    """Initial datum lifted to a strictly positive floor.

    values = u0 + epsilon + slope correctors at the endpoints.  The
    correctors restore the t = 0 compatibility condition, which the plain
    shift breaks whenever k is nonzero.  By construction values >= epsilon
    everywhere and the family is nodewise monotone in epsilon.
    """

    epsilon: float
    values: np.ndarray
    amplitudes: tuple[float, float]
    residuals: tuple[float, float]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _corrector_bump(grid: Grid, endpoint: str) -> np.ndarray:
    """C^1 bump with unit outward normal derivative at its endpoint.

    Shape (w/3)(1 - s/w)^3 where s is the distance to the endpoint and w the
    support width; nonnegative, vanishing with its slope at s = w.
    """
    L = grid.domain.length
    w = min(max(4.0 * grid.h, L / 10.0), 0.5 * L)
    s = grid.nodes if _endpoint_index(endpoint) == 0 else L - grid.nodes
    return (w / 3.0) * np.clip(1.0 - s / w, 0.0, None) ** 3


def regularize_initial(spec: ProblemSpec, epsilon: float,
                       max_iter: int = 50, tol: float = COMPAT_TOL) -> RegularizedDatum:
    """Shift the initial datum to a floor epsilon and repair compatibility.

    The corrector amplitude at each endpoint is fixed-point solved so the
    discrete compatibility residual of the shifted datum drops below tol.
    The bump's slope is calibrated against the same one-sided stencil used
    by compatibility_residual, so the imposed slope is seen exactly.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    grid = spec.grid
    bumps = [_corrector_bump(grid, e) for e in ENDPOINTS]
    # discrete normal derivative of each bump at its own endpoint
    betas = [normal_derivative(bumps[i], grid, e) for i, e in enumerate(ENDPOINTS)]

    amps = np.zeros(2)
    residuals = (math.inf, math.inf)
    for _ in range(max_iter):
        values = spec.u0 + epsilon + amps[0] * bumps[0] + amps[1] * bumps[1]
        residuals = compatibility_residual(np.maximum(values, 0.0), spec.k,
                                           spec.l, grid)
        if max(abs(residuals[0]), abs(residuals[1])) <= tol:
            if np.min(values) < epsilon - 1e-12:
                raise RegularizationError(
                    "corrected datum dropped below its floor", float(np.min(values)))
            return RegularizedDatum(epsilon=epsilon, values=values,
                                    amplitudes=(float(amps[0]), float(amps[1])),
                                    residuals=residuals)
        amps -= np.asarray(residuals) / np.asarray(betas)
    raise RegularizationError(
        f"corrector did not converge in {max_iter} iterations",
        max(abs(residuals[0]), abs(residuals[1])))
