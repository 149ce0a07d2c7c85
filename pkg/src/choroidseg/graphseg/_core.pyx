# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled Boykov-Kolmogorov max-flow on closed-set surface graphs.

Arcs come in (forward, reverse) pairs at ids (2e, 2e+1) so the sister of arc
``a`` is ``a ^ 1``. Terminal capacities are merged per node: tr_cap > 0 is
residual from the source, tr_cap < 0 residual to the sink. The search trees
follow the usual grow / augment / adopt cycle with the timestamp-distance
heuristics; on termination the source tree is exactly the set of nodes
reachable from the source in the residual network, i.e. the minimal minimum
cut.
"""

import numpy as np

cimport numpy as cnp

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32
ctypedef cnp.uint8_t u8

cdef enum:
    TREE_FREE = 0
    TREE_S = 1
    TREE_T = 2

cdef enum:
    PARENT_NONE = -1
    PARENT_TERMINAL = -2

cdef i64 INF_DIST = 2 ** 62


cdef class _Solver:
    cdef Py_ssize_t n
    cdef Py_ssize_t n_arcs
    cdef i64[::1] rcap
    cdef i32[::1] ahead          # head node of each directed arc
    cdef i64[::1] indptr         # CSR offsets of per-node arc lists
    cdef i32[::1] adj            # arc ids grouped by tail node
    cdef i64[::1] tr_cap
    cdef u8[::1] tree
    cdef i32[::1] parent         # parent arc id, or PARENT_* sentinel
    cdef i64[::1] ts
    cdef i64[::1] dist
    cdef i32[::1] active_ring
    cdef u8[::1] in_active
    cdef Py_ssize_t active_head
    cdef Py_ssize_t active_tail
    cdef Py_ssize_t ring_cap
    cdef i32[::1] orphan_ring
    cdef Py_ssize_t orphan_head
    cdef Py_ssize_t orphan_tail
    cdef i64 time
    cdef i64 flow

    def __init__(self, i32[::1] tails, i32[::1] heads, i64[::1] arc_cap,
                 i64[::1] tr_cap, Py_ssize_t n_nodes):
        cdef Py_ssize_t m = tails.shape[0]
        cdef Py_ssize_t e, v
        cdef i64 pos
        self.n = n_nodes
        self.n_arcs = 2 * m
        rcap = np.empty(2 * m, dtype=np.int64)
        ahead = np.empty(2 * m, dtype=np.int32)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        adj = np.empty(2 * m, dtype=np.int32)
        self.rcap = rcap
        self.ahead = ahead
        self.indptr = indptr
        self.adj = adj
        for e in range(m):
            self.rcap[2 * e] = arc_cap[e]
            self.rcap[2 * e + 1] = 0
            self.ahead[2 * e] = heads[e]
            self.ahead[2 * e + 1] = tails[e]
        for e in range(m):
            self.indptr[tails[e] + 1] += 1
            self.indptr[heads[e] + 1] += 1
        for v in range(n_nodes):
            self.indptr[v + 1] += self.indptr[v]
        cursor = np.asarray(indptr[:n_nodes]).copy()
        cdef i64[::1] cur = cursor
        for e in range(m):
            v = tails[e]
            self.adj[cur[v]] = 2 * e
            cur[v] += 1
            v = heads[e]
            self.adj[cur[v]] = 2 * e + 1
            cur[v] += 1
        self.tr_cap = np.asarray(tr_cap).copy()
        self.tree = np.zeros(n_nodes, dtype=np.uint8)
        self.parent = np.full(n_nodes, PARENT_NONE, dtype=np.int32)
        self.ts = np.zeros(n_nodes, dtype=np.int64)
        self.dist = np.zeros(n_nodes, dtype=np.int64)
        self.ring_cap = n_nodes + 1
        self.active_ring = np.empty(self.ring_cap, dtype=np.int32)
        self.in_active = np.zeros(n_nodes, dtype=np.uint8)
        self.active_head = 0
        self.active_tail = 0
        self.orphan_ring = np.empty(self.ring_cap, dtype=np.int32)
        self.orphan_head = 0
        self.orphan_tail = 0
        self.time = 1
        self.flow = 0

    cdef inline void _activate(self, i32 v):
        if not self.in_active[v]:
            self.in_active[v] = 1
            self.active_ring[self.active_tail] = v
            self.active_tail += 1
            if self.active_tail == self.ring_cap:
                self.active_tail = 0

    cdef inline i32 _next_active(self):
        cdef i32 v
        while self.active_head != self.active_tail:
            v = self.active_ring[self.active_head]
            self.active_head += 1
            if self.active_head == self.ring_cap:
                self.active_head = 0
            self.in_active[v] = 0
            if self.tree[v] != TREE_FREE:
                return v
        return -1

    cdef inline void _orphan_push(self, i32 v):
        self.orphan_ring[self.orphan_tail] = v
        self.orphan_tail += 1
        if self.orphan_tail == self.ring_cap:
            self.orphan_tail = 0

    cdef inline i32 _orphan_pop(self):
        cdef i32 v
        if self.orphan_head == self.orphan_tail:
            return -1
        v = self.orphan_ring[self.orphan_head]
        self.orphan_head += 1
        if self.orphan_head == self.ring_cap:
            self.orphan_head = 0
        return v

    cdef i32 _grow(self, i32 v):
        """Scan v's arcs; adopt free neighbours, return a middle arc or -1."""
        cdef i64 j
        cdef i32 a, u
        cdef bint s_tree = self.tree[v] == TREE_S
        for j in range(self.indptr[v], self.indptr[v + 1]):
            a = self.adj[j]
            if s_tree:
                if self.rcap[a] <= 0:
                    continue
            else:
                if self.rcap[a ^ 1] <= 0:
                    continue
            u = self.ahead[a]
            if self.tree[u] == TREE_FREE:
                self.tree[u] = TREE_S if s_tree else TREE_T
                self.parent[u] = a if s_tree else a ^ 1
                self.ts[u] = self.ts[v]
                self.dist[u] = self.dist[v] + 1
                self._activate(u)
            elif (self.tree[u] == TREE_T) == s_tree:
                # the trees touch through a residual arc
                return a if s_tree else a ^ 1
            elif self.ts[u] <= self.ts[v] and self.dist[u] > self.dist[v] + 1:
                # cheaper root path through v; safe, v cannot be u's descendant
                self.parent[u] = a if s_tree else a ^ 1
                self.ts[u] = self.ts[v]
                self.dist[u] = self.dist[v] + 1
        return -1

    cdef void _augment(self, i32 middle):
        cdef i64 b = self.rcap[middle]
        cdef i32 v, pa
        # bottleneck over the source-side path, middle arc, sink-side path
        v = self.ahead[middle ^ 1]
        while True:
            pa = self.parent[v]
            if pa == PARENT_TERMINAL:
                break
            if self.rcap[pa] < b:
                b = self.rcap[pa]
            v = self.ahead[pa ^ 1]
        if self.tr_cap[v] < b:
            b = self.tr_cap[v]
        v = self.ahead[middle]
        while True:
            pa = self.parent[v]
            if pa == PARENT_TERMINAL:
                break
            if self.rcap[pa] < b:
                b = self.rcap[pa]
            v = self.ahead[pa]
        if -self.tr_cap[v] < b:
            b = -self.tr_cap[v]
        # push b along the path; saturated tree arcs orphan their child node
        self.rcap[middle] -= b
        self.rcap[middle ^ 1] += b
        v = self.ahead[middle ^ 1]
        while True:
            pa = self.parent[v]
            if pa == PARENT_TERMINAL:
                break
            self.rcap[pa] -= b
            self.rcap[pa ^ 1] += b
            if self.rcap[pa] == 0:
                self.parent[v] = PARENT_NONE
                self._orphan_push(v)
            v = self.ahead[pa ^ 1]
        self.tr_cap[v] -= b
        if self.tr_cap[v] == 0:
            self.parent[v] = PARENT_NONE
            self._orphan_push(v)
        v = self.ahead[middle]
        while True:
            pa = self.parent[v]
            if pa == PARENT_TERMINAL:
                break
            self.rcap[pa] -= b
            self.rcap[pa ^ 1] += b
            if self.rcap[pa] == 0:
                self.parent[v] = PARENT_NONE
                self._orphan_push(v)
            v = self.ahead[pa]
        self.tr_cap[v] += b
        if self.tr_cap[v] == 0:
            self.parent[v] = PARENT_NONE
            self._orphan_push(v)
        self.flow += b

    cdef i64 _origin_dist(self, i32 u, bint s_tree):
        """Distance from u to its terminal, or INF_DIST if u is cut off."""
        cdef i64 d = 0
        cdef i64 dd
        cdef i32 j = u
        cdef i32 pa
        while True:
            if self.ts[j] == self.time:
                d += self.dist[j]
                break
            pa = self.parent[j]
            if pa == PARENT_TERMINAL:
                self.ts[j] = self.time
                self.dist[j] = 1
                d += 1
                break
            if pa == PARENT_NONE:
                return INF_DIST
            d += 1
            j = self.ahead[pa ^ 1] if s_tree else self.ahead[pa]
        dd = d
        j = u
        while self.ts[j] != self.time:
            self.ts[j] = self.time
            self.dist[j] = dd
            dd -= 1
            pa = self.parent[j]
            j = self.ahead[pa ^ 1] if s_tree else self.ahead[pa]
        return d

    cdef void _adopt(self, i32 v):
        cdef bint s_tree = self.tree[v] == TREE_S
        cdef i64 j, d
        cdef i64 best_d = INF_DIST
        cdef i32 a, u, pa
        cdef i32 best = PARENT_NONE
        for j in range(self.indptr[v], self.indptr[v + 1]):
            a = self.adj[j]
            if s_tree:
                if self.rcap[a ^ 1] <= 0:   # candidate tree arc u -> v
                    continue
            else:
                if self.rcap[a] <= 0:       # candidate tree arc v -> u
                    continue
            u = self.ahead[a]
            if (self.tree[u] == TREE_S) != s_tree or self.tree[u] == TREE_FREE:
                continue
            d = self._origin_dist(u, s_tree)
            if d < best_d:
                best_d = d
                best = (a ^ 1) if s_tree else a
                if d == 1:
                    break               # cannot beat a terminal-rooted parent
        if best != PARENT_NONE:
            self.parent[v] = best
            self.ts[v] = self.time
            self.dist[v] = best_d + 1
            return
        # no valid parent: v leaves its tree, neighbours get notified
        for j in range(self.indptr[v], self.indptr[v + 1]):
            a = self.adj[j]
            u = self.ahead[a]
            if self.tree[u] == TREE_FREE or (self.tree[u] == TREE_S) != s_tree:
                continue
            if s_tree:
                if self.rcap[a ^ 1] > 0:
                    self._activate(u)
            else:
                if self.rcap[a] > 0:
                    self._activate(u)
            pa = self.parent[u]
            if pa >= 0:
                if s_tree:
                    if self.ahead[pa ^ 1] == v:
                        self.parent[u] = PARENT_NONE
                        self._orphan_push(u)
                else:
                    if self.ahead[pa] == v:
                        self.parent[u] = PARENT_NONE
                        self._orphan_push(u)
        self.tree[v] = TREE_FREE

    cdef void _process_orphans(self):
        cdef i32 v
        while True:
            v = self._orphan_pop()
            if v < 0:
                return
            self.time += 1
            self._adopt(v)

    def run(self):
        cdef Py_ssize_t v
        cdef i32 cur, middle
        for v in range(self.n):
            if self.tr_cap[v] > 0:
                self.tree[v] = TREE_S
                self.parent[v] = PARENT_TERMINAL
                self.dist[v] = 1
                self._activate(<i32> v)
            elif self.tr_cap[v] < 0:
                self.tree[v] = TREE_T
                self.parent[v] = PARENT_TERMINAL
                self.dist[v] = 1
                self._activate(<i32> v)
        while True:
            cur = self._next_active()
            if cur < 0:
                break
            middle = self._grow(cur)
            if middle >= 0:
                self._activate(cur)     # keep growing from here afterwards
                self._augment(middle)
                self._process_orphans()
        in_source = np.zeros(self.n, dtype=bool)
        for v in range(self.n):
            if self.tree[v] == TREE_S:
                in_source[v] = True
        return int(self.flow), in_source


def maxflow(Py_ssize_t n_nodes, tails, heads, tr_cap, i64 inf_cap, caps=None):
    """Min s-t cut of a closed-set graph; returns (flow, source-side mask).

    Structural arcs (tails[e] -> heads[e]) all get capacity ``inf_cap``
    unless ``caps`` overrides them per arc. ``tr_cap`` holds merged terminal
    capacities (positive: from source, negative: to sink) and is not
    modified.
    """
    tails = np.ascontiguousarray(tails, dtype=np.int32)
    heads = np.ascontiguousarray(heads, dtype=np.int32)
    tr_cap = np.ascontiguousarray(tr_cap, dtype=np.int64)
    if tr_cap.shape[0] != n_nodes:
        raise ValueError("tr_cap length must equal n_nodes")
    if caps is None:
        arc_cap = np.full(tails.shape[0], inf_cap, dtype=np.int64)
    else:
        arc_cap = np.ascontiguousarray(caps, dtype=np.int64)
        if arc_cap.shape[0] != tails.shape[0]:
            raise ValueError("caps length must equal number of arcs")
    if tails.shape[0] and (tails.min() < 0 or tails.max() >= n_nodes
                           or heads.min() < 0 or heads.max() >= n_nodes):
        raise ValueError("arc endpoints out of range")
    solver = _Solver(tails, heads, arc_cap, tr_cap, n_nodes)
    return solver.run()
