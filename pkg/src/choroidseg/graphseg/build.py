"""Reduction of a banded multi-surface problem to a minimum s-t cut.

Per column and surface, one node per depth inside the propagated band. Node
(s, x, y, k) selected means h_s(x, y) >= band_lo + k, so a surface is the top
of a closed set. Cost differences along the column become terminal
capacities, and every structural arc (downward intra-column, smoothness,
separation) is uncuttable. The bottom node of each column gets an infinite
source tie so the closed set is never empty.

Capacities are int64 throughout; the infinite capacity is one more than the
sum of all finite terminal capacities, which no cut of finite arcs can reach.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import GraphSegProblem, propagate_bands

__all__ = ["BuiltGraph", "quantize_costs", "build_graph"]

# quantized cost values must stay in int32 even though arithmetic is int64
_VALUE_LIMIT = 2 ** 31 - 1


@dataclass(frozen=True, eq=False)
class BuiltGraph:
    """Arc lists plus the bookkeeping needed to read heights back out."""

    n_nodes: int
    tails: np.ndarray           # int32 structural arc tails
    heads: np.ndarray           # int32 structural arc heads
    tr_cap: np.ndarray          # int64 terminal capacity (>0 source, <0 sink)
    inf_cap: int                # capacity of every structural arc
    lo: np.ndarray              # (S, nx, ny) propagated band floor
    hi: np.ndarray              # (S, nx, ny) propagated band ceiling
    node_base: np.ndarray       # (S*nx*ny,) first node id of each column
    col_of_node: np.ndarray     # (n_nodes,) flattened column id per node

    @property
    def n_arcs(self) -> int:
        return self.tails.size


def quantize_costs(costs: np.ndarray, quantization: float) -> np.ndarray:
    """Round costs onto the integer grid used for exact graph arithmetic."""
    q = np.round(costs * quantization)
    if q.max(initial=0.0) > _VALUE_LIMIT:
        raise ValueError(
            f"quantized cost {q.max():.0f} exceeds the 32-bit value range; "
            f"lower the quantization or rescale the costs")
    return q.astype(np.int64)


def _ragged_ranges(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For per-item counts, return (item index, within-item offset) arrays."""
    counts = counts.astype(np.int64)
    if counts.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    total = int(counts.sum())
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    idx = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    offs = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    return idx, offs


def _shifted_arcs(base_p: np.ndarray, base_q: np.ndarray, size_p: np.ndarray,
                  shift: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arcs (p, k) -> (q, k + shift) for every k with k + shift >= 1.

    Upper band ends never clip: propagation already guarantees
    k + shift <= size_q - 1 for every emitted arc.
    """
    k_min = np.maximum(1 - shift, 0)
    counts = np.maximum(size_p - k_min, 0)
    idx, offs = _ragged_ranges(counts)
    k = k_min[idx] + offs
    tails = base_p[idx] + k
    heads = base_q[idx] + k + shift[idx]
    return tails, heads


def build_graph(problem: GraphSegProblem, qcosts: np.ndarray) -> BuiltGraph:
    lo, hi = propagate_bands(problem)
    n_surf, nx, ny = lo.shape
    nzs = problem.costs.shape[3]

    sizes = (hi - lo + 1).ravel()
    node_base = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    n_nodes = int(sizes.sum())
    col_of_node, k_of_node = _ragged_ranges(sizes)

    z_of_node = lo.ravel()[col_of_node] + k_of_node
    c_node = qcosts.reshape(-1, nzs)[col_of_node, z_of_node]
    w = c_node - np.roll(c_node, 1)            # within-column first difference
    is_bottom = k_of_node == 0
    tr_cap = np.where(is_bottom, 0, -w)
    inf_cap = int(np.abs(tr_cap).sum()) + 1
    tr_cap[is_bottom] = inf_cap

    tails_parts: list[np.ndarray] = []
    heads_parts: list[np.ndarray] = []

    interior = ~is_bottom
    node_ids = np.arange(n_nodes, dtype=np.int64)
    tails_parts.append(node_ids[interior])
    heads_parts.append(node_ids[interior] - 1)

    base3 = node_base.reshape(n_surf, nx, ny)
    size3 = sizes.reshape(n_surf, nx, ny)

    def emit(base_p, base_q, size_p, shift):
        t, h = _shifted_arcs(base_p.ravel(), base_q.ravel(),
                             size_p.ravel(), shift.ravel())
        tails_parts.append(t)
        heads_parts.append(h)

    for axis, delta in ((1, problem.delta_x), (2, problem.delta_y)):
        p = [slice(None)] * 3
        q = [slice(None)] * 3
        p[axis] = slice(None, -1)
        q[axis] = slice(1, None)
        p, q = tuple(p), tuple(q)
        shift_fwd = lo[p] - lo[q] - delta
        emit(base3[p], base3[q], size3[p], shift_fwd)
        shift_bwd = lo[q] - lo[p] - delta
        emit(base3[q], base3[p], size3[q], shift_bwd)

    for i, (gmin, gmax) in enumerate(problem.separations):
        shift_lower = lo[i] - lo[i + 1] + gmin      # h_{i+1} >= h_i + gmin
        emit(base3[i], base3[i + 1], size3[i], shift_lower)
        shift_upper = lo[i + 1] - lo[i] - gmax      # h_i >= h_{i+1} - gmax
        emit(base3[i + 1], base3[i], size3[i + 1], shift_upper)

    tails = np.concatenate(tails_parts).astype(np.int32)
    heads = np.concatenate(heads_parts).astype(np.int32)
    return BuiltGraph(n_nodes=n_nodes, tails=tails, heads=heads,
                      tr_cap=tr_cap.astype(np.int64), inf_cap=inf_cap,
                      lo=lo, hi=hi, node_base=node_base,
                      col_of_node=col_of_node)
