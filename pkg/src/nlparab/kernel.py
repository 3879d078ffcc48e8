"""Neumann heat kernel on an interval as a truncated cosine series.

The heat semigroup on (0, L) with zero-flux endpoints has the exact
eigenfunction expansion

    G(x, y; t) = 1/L + (2/L) * sum_{m>=1} cos(m pi x/L) cos(m pi y/L)
                                 * exp(-(m pi / L)^2 t),

which is symmetric in (x, y), nonnegative, and integrates to one in y for
every x and t > 0.  Truncating at M modes keeps all three properties up to
the series tail, which decays like exp(-(M pi/L)^2 t): the kernel is
therefore certified only for gaps t >= t_min, with M picked so the tail at
t_min is below a requested tolerance.

On a uniform grid the composite Simpson (or trapezoid) rule integrates
cosine modes below n_cells to exactly zero; modes at multiples of n_cells
alias and would corrupt the discrete row sums whenever the certified
window needs more modes than the grid can represent (gaps below ~h^2).
The node-to-node matrices are therefore band-limited to the alias-free
band m <= n_cells - 1 -- the spectrally exact projection of the kernel
onto the grid -- which makes discrete row sums equal one to roundoff at
every gap.  The solvers lean on that: propagating a constant returns the
constant, and resolved eigenmodes decay at their exact rates.  Pointwise
series evaluation (``value``) keeps the full mode count and is the thing
to compare against reference kernels.

Node-to-node kernel matrices are precomputed for every time gap the time
quadrature will request (multiples of dt, plus the clamped half-step gap),
so repeated sweeps of the integral operator reuse the same matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import KernelWindowError
from .problem import Grid

#: Relative slack when matching a requested gap against the cached gap set.
_GAP_SNAP = 1e-9


def choose_modes(L: float, t_min: float, tol: float) -> int:
    """Smallest mode count whose series tail at gap t_min is below tol.

    The tail (2/L) * sum_{m>M} exp(-(m pi/L)^2 t_min) is summed directly;
    terms decay faster than geometrically, so once the running term falls
    below a fraction of tol the geometric bound closes the remainder.
    """
    if not (t_min > 0 and tol > 0):
        raise ValueError("t_min and tol must be positive")
    beta = (math.pi / L) ** 2 * t_min
    # upper cutoff sized so the whole remainder (width ~ 1/sqrt(beta) terms
    # of comparable size) is far below tol
    width = max(1.0, 0.5 / beta)
    m_stop = int(math.ceil(math.sqrt(
        (math.log(width * 4.0 / (L * tol)) + 5.0) / beta))) + 2
    terms = (2.0 / L) * np.exp(-beta * np.arange(1, m_stop + 1, dtype=float) ** 2)
    # integral bound on the remainder past m_stop
    remainder = terms[-1] / (2.0 * beta * m_stop)
    tail = remainder
    m = m_stop
    while m >= 1:
        if tail + terms[m - 1] > tol:
            return m
        tail += terms[m - 1]
        m -= 1
    return 0


@dataclass(frozen=True)
class NeumannHeatKernel:
    """Truncated series kernel with precomputed node-to-node gap matrices."""

    L: float
    modes: int
    matrix_modes: int         # band limit of the cached matrices
    t_min: float
    grid: Grid
    gaps: np.ndarray          # cached time gaps, ascending
    matrices: np.ndarray      # shape (len(gaps), n_nodes, n_nodes)
    # exact int_0^dt G(x_i, e; s) ds at the two endpoints e, shape (n_nodes, 2);
    # the kernel is 1/sqrt(s)-singular at the endpoints as s -> 0, so time
    # quadratures integrate its last-cell mass in closed form instead of
    # sampling it
    boundary_cell_mass: np.ndarray

    @classmethod
    def for_grid(cls, grid: Grid, t_min: float | None = None,
                 tol: float = 1e-12, gaps: np.ndarray | None = None
                 ) -> "NeumannHeatKernel":
        """Build the kernel with every gap the time quadrature can request.

        By default that is dt/2 (the clamped top-of-interval gap) and every
        multiple of dt up to the horizon; t_min defaults to dt/2 so the
        quadrature never leaves the certified window.
        """
        L = grid.domain.length
        if t_min is None:
            t_min = 0.5 * grid.dt
        if gaps is None:
            gaps = np.concatenate(([0.5 * grid.dt],
                                   grid.dt * np.arange(1, grid.n_levels)))
        gaps = np.sort(np.asarray(gaps, dtype=float))
        if gaps[0] < t_min * (1.0 - 1e-12):
            raise KernelWindowError(float(gaps[0]), t_min)
        modes = choose_modes(L, t_min, tol)
        matrix_modes = min(modes, grid.n_cells - 1)
        matrices = _series_matrices(grid.nodes, L, matrix_modes, gaps)
        matrices.setflags(write=False)
        gaps.setflags(write=False)
        return cls(L=L, modes=modes, matrix_modes=matrix_modes, t_min=t_min,
                   grid=grid, gaps=gaps, matrices=matrices)

    def value(self, x, y, gap: float):
        """Series value G(x, y; gap); vectorized over x and y together."""
        self._check_gap(gap)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        m = np.arange(1, self.modes + 1, dtype=float)
        lam = (m * math.pi / self.L) ** 2
        cx = np.cos(np.multiply.outer(x, m * math.pi / self.L))
        cy = np.cos(np.multiply.outer(y, m * math.pi / self.L))
        out = 1.0 / self.L + (2.0 / self.L) * (cx * cy) @ np.exp(-lam * gap)
        return out if out.shape else float(out)

    def matrix(self, gap: float) -> np.ndarray:
        """Cached node-to-node matrix for one of the prepared gaps."""
        self._check_gap(gap)
        idx = int(np.searchsorted(self.gaps, gap))
        for j in (idx - 1, idx):
            if 0 <= j < len(self.gaps):
                g = self.gaps[j]
                if abs(g - gap) <= _GAP_SNAP * max(g, gap):
                    return self.matrices[j]
        raise KeyError(f"gap {gap:.6e} not in the prepared gap set")

    def _check_gap(self, gap: float):
        if gap < self.t_min * (1.0 - 1e-12):
            raise KernelWindowError(gap, self.t_min)


def _series_matrices(nodes: np.ndarray, L: float, modes: int,
                     gaps: np.ndarray) -> np.ndarray:
    """Evaluate the truncated series on nodes x nodes for every gap."""
    n = nodes.size
    out = np.empty((gaps.size, n, n))
    if modes == 0:
        out[:] = 1.0 / L
        return out
    m = np.arange(1, modes + 1, dtype=float)
    lam = (m * math.pi / L) ** 2
    C = np.cos(np.outer(nodes, m * math.pi / L))        # (n, modes)
    for g, gap in enumerate(gaps):
        decay = np.exp(-lam * gap)
        out[g] = 1.0 / L + (2.0 / L) * (C * decay) @ C.T
    return out


def heat_propagate(field: np.ndarray, gap: float,
                   kernel: NeumannHeatKernel) -> np.ndarray:
    """Apply the heat semigroup over one time gap to a nodal field.

    Quadrature in y uses the grid's spatial rule; with the cosine series on
    a uniform grid this preserves constants to roundoff.
    """
    field = np.asarray(field, dtype=float)
    grid = kernel.grid
    if field.shape != (grid.n_nodes,):
        raise ValueError(
            f"field has {field.shape} values, grid has {grid.n_nodes} nodes")
    try:
        G = kernel.matrix(gap)
    except KeyError:
        # same band limit as the cache, so off-cache gaps behave identically
        G = _series_matrices(grid.nodes, kernel.L, kernel.matrix_modes,
                             np.asarray([gap], dtype=float))[0]
    return G @ (grid.quad_weights * field)
