"""Multi-surface column-graph problem definition and band feasibility.

A problem asks for S terrain surfaces h_s(x, y) on an (nx, ny, nz) lattice,
minimizing the summed per-voxel costs subject to hard constraints:

* per-column search band:  band_lo <= h_s <= band_hi
* smoothness:              |h(p) - h(q)| <= delta_axis for 4-neighbours p, q
* separation (s, s+1):     min_gap <= h_{s+1} - h_s <= max_gap

Before any graph is built, the per-surface bands are tightened to the
constraint fixpoint (arc-consistency over the interval bounds). That either
proves the constraint system infeasible, naming the first offending column,
or guarantees every later graph arc lands inside a band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GraphSegProblem", "InfeasibleProblemError", "propagate_bands"]


class InfeasibleProblemError(ValueError):
    """The hard constraints admit no surface configuration at all."""

    def __init__(self, surface: int, x: int, y: int, detail: str):
        self.surface = int(surface)
        self.x = int(x)
        self.y = int(y)
        super().__init__(
            f"no feasible configuration: band of surface {surface} empties at "
            f"column (x={x}, y={y}) ({detail})")


@dataclass(frozen=True, eq=False)
class GraphSegProblem:
    """Costs, bands and hard constraints for one multi-surface solve.

    ``costs`` has shape (n_surfaces, nx, ny, nz) with finite non-negative
    values; ``band_lo``/``band_hi`` (nx, ny) bound every surface before
    constraint propagation. ``separations`` holds one (min_gap, max_gap) per
    adjacent surface pair, ordered top surface first.
    """

    costs: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    delta_x: int = 2
    delta_y: int = 2
    separations: tuple[tuple[int, int], ...] = ()
    quantization: float = 1.0e4

    def __post_init__(self) -> None:
        costs = np.asarray(self.costs, dtype=np.float64)
        if costs.ndim != 4:
            raise ValueError(f"costs must be 4-D (S, nx, ny, nz), got {costs.shape}")
        if costs.shape[0] < 1:
            raise ValueError("need at least one surface")
        if not np.all(np.isfinite(costs)):
            raise ValueError("costs must be finite")
        if costs.size and costs.min() < 0:
            raise ValueError("costs must be non-negative")
        lo = np.asarray(self.band_lo)
        hi = np.asarray(self.band_hi)
        if lo.shape != costs.shape[1:3] or hi.shape != costs.shape[1:3]:
            raise ValueError("band_lo/band_hi must have shape (nx, ny)")
        if not (np.issubdtype(lo.dtype, np.integer) and np.issubdtype(hi.dtype, np.integer)):
            raise ValueError("band bounds must be integer arrays")
        nz = costs.shape[3]
        if lo.min() < 0 or hi.max() > nz - 1:
            raise ValueError(f"band bounds must lie in [0, {nz - 1}]")
        if np.any(lo > hi):
            raise ValueError("band_lo must be <= band_hi everywhere")
        if not (self.delta_x >= 0 and self.delta_y >= 0):
            raise ValueError("smoothness deltas must be >= 0")
        seps = tuple((int(a), int(b)) for a, b in self.separations)
        if len(seps) != costs.shape[0] - 1:
            raise ValueError(
                f"{costs.shape[0]} surfaces need {costs.shape[0] - 1} separation "
                f"pairs, got {len(seps)}")
        for a, b in seps:
            if not 0 <= a <= b:
                raise ValueError(f"separation pair must satisfy 0 <= min <= max, got {(a, b)}")
        if not self.quantization > 0:
            raise ValueError("quantization must be > 0")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "band_lo", lo.astype(np.int64))
        object.__setattr__(self, "band_hi", hi.astype(np.int64))
        object.__setattr__(self, "delta_x", int(self.delta_x))
        object.__setattr__(self, "delta_y", int(self.delta_y))
        object.__setattr__(self, "separations", seps)

    @property
    def n_surfaces(self) -> int:
        return self.costs.shape[0]

    @property
    def lattice_shape(self) -> tuple[int, int, int]:
        return self.costs.shape[1:]


def _sweep_smooth_axis(lo: np.ndarray, hi: np.ndarray, axis: int, delta: int) -> None:
    """Exact interval fixpoint along one spatial axis, in place.

    Forward+backward running sweeps; a chain constraint reaches its fixpoint
    in one pass of each direction.
    """
    n = lo.shape[axis]
    view_lo = np.moveaxis(lo, axis, 0)
    view_hi = np.moveaxis(hi, axis, 0)
    for i in range(1, n):
        np.maximum(view_lo[i], view_lo[i - 1] - delta, out=view_lo[i])
        np.minimum(view_hi[i], view_hi[i - 1] + delta, out=view_hi[i])
    for i in range(n - 2, -1, -1):
        np.maximum(view_lo[i], view_lo[i + 1] - delta, out=view_lo[i])
        np.minimum(view_hi[i], view_hi[i + 1] + delta, out=view_hi[i])


def propagate_bands(problem: GraphSegProblem) -> tuple[np.ndarray, np.ndarray]:
    """Tighten per-surface bands to the constraint fixpoint.

    Returns (lo, hi) of shape (S, nx, ny). Raises
    :class:`InfeasibleProblemError` when some band empties; the reported
    column is the first in (surface, x, y) scan order.
    """
    n_surf = problem.n_surfaces
    nx, ny, _ = problem.lattice_shape
    lo = np.broadcast_to(problem.band_lo, (n_surf, nx, ny)).copy()
    hi = np.broadcast_to(problem.band_hi, (n_surf, nx, ny)).copy()
    while True:
        lo_before = lo.copy()
        hi_before = hi.copy()
        for s in range(n_surf):
            _sweep_smooth_axis(lo[s], hi[s], 0, problem.delta_x)
            _sweep_smooth_axis(lo[s], hi[s], 1, problem.delta_y)
        for i, (gmin, gmax) in enumerate(problem.separations):
            np.maximum(lo[i + 1], lo[i] + gmin, out=lo[i + 1])
            np.minimum(hi[i + 1], hi[i] + gmax, out=hi[i + 1])
        for i in range(len(problem.separations) - 1, -1, -1):
            gmin, gmax = problem.separations[i]
            np.maximum(lo[i], lo[i + 1] - gmax, out=lo[i])
            np.minimum(hi[i], hi[i + 1] - gmin, out=hi[i])
        empty = lo > hi
        if empty.any():
            s, x, y = np.unravel_index(int(np.argmax(empty)), empty.shape)
            raise InfeasibleProblemError(
                s, x, y, f"lo={lo[s, x, y]} > hi={hi[s, x, y]} after propagation")
        if np.array_equal(lo, lo_before) and np.array_equal(hi, hi_before):
            return lo, hi
