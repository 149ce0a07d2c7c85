"""Pure-Python max-flow fallback (Dinic's algorithm).

Drop-in replacement for the compiled core: same signature, same results
(the source-side set of a min cut is unique for the minimal cut both report,
namely the nodes reachable from the source in the final residual network).
Orders of magnitude slower; meant for environments without a compiler and
for cross-checking the compiled kernel.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = ["maxflow"]


def maxflow(n_nodes, tails, heads, tr_cap, inf_cap, caps=None):
    """Min s-t cut of a closed-set graph; returns (flow, source-side mask).

    Mirrors ``_core.maxflow``: structural arcs tails->heads with capacity
    ``inf_cap`` (or per-arc ``caps``), terminal capacities merged in
    ``tr_cap``. Python integers throughout, so capacities cannot overflow.
    """
    n_nodes = int(n_nodes)
    tails = [int(v) for v in tails]
    heads = [int(v) for v in heads]
    tr = [int(v) for v in tr_cap]
    if len(tr) != n_nodes:
        raise ValueError("tr_cap length must equal n_nodes")
    if caps is None:
        arc_cap = [int(inf_cap)] * len(tails)
    else:
        arc_cap = [int(c) for c in caps]
        if len(arc_cap) != len(tails):
            raise ValueError("caps length must equal number of arcs")
    if tails and not (0 <= min(tails) and max(tails) < n_nodes
                      and 0 <= min(heads) and max(heads) < n_nodes):
        raise ValueError("arc endpoints out of range")

    n = n_nodes + 2
    source, sink = n_nodes, n_nodes + 1
    to: list[int] = []
    cap: list[int] = []
    graph: list[list[int]] = [[] for _ in range(n)]

    def add_edge(u: int, v: int, c: int) -> None:
        graph[u].append(len(to))
        to.append(v)
        cap.append(c)
        graph[v].append(len(to))
        to.append(u)
        cap.append(0)

    for u, v, c in zip(tails, heads, arc_cap):
        add_edge(u, v, c)
    for v, c in enumerate(tr):
        if c > 0:
            add_edge(source, v, c)
        elif c < 0:
            add_edge(v, sink, -c)

    level = [-1] * n

    def bfs() -> bool:
        for i in range(n):
            level[i] = -1
        level[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for a in graph[u]:
                v = to[a]
                if cap[a] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level[sink] >= 0

    flow = 0
    while bfs():
        it = [0] * n
        while True:
            # iterative DFS for one augmenting path in the level graph
            path: list[int] = []
            u = source
            while u != sink:
                advanced = False
                while it[u] < len(graph[u]):
                    a = graph[u][it[u]]
                    if cap[a] > 0 and level[to[a]] == level[u] + 1:
                        path.append(a)
                        u = to[a]
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    if u == source:
                        u = -1
                        break
                    level[u] = -1           # dead end, prune
                    a = path.pop()
                    u = to[a ^ 1]
            if u < 0:
                break
            bottleneck = min(cap[a] for a in path)
            for a in path:
                cap[a] -= bottleneck
                cap[a ^ 1] += bottleneck
            flow += bottleneck

    in_source = np.zeros(n_nodes, dtype=bool)
    seen = [False] * n
    seen[source] = True
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for a in graph[u]:
            v = to[a]
            if cap[a] > 0 and not seen[v]:
                seen[v] = True
                queue.append(v)
    for v in range(n_nodes):
        in_source[v] = seen[v]
    return flow, in_source
