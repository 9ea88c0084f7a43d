"""Dinic max-flow on small graphs with float capacities.

Sized for facet graphs (hundreds to a few thousand nodes), not for pixel
grids.  Capacities are nonnegative floats or ``inf``; the residual tolerance
is scaled to the largest finite capacity so min cuts on well-separated facet
areas are exact up to summation order.
"""

from __future__ import annotations

import math


class Dinic:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head = [[] for _ in range(n_nodes)]   # node -> list of edge ids
        self.to = []
        self.cap = []

    def add_edge(self, u: int, v: int, cap: float, cap_rev: float = 0.0) -> int:
        """Add edge u->v with capacity cap and reverse capacity cap_rev.

        Returns the forward edge id; the reverse edge is id ^ 1.
        """
        if cap < 0 or cap_rev < 0:
            raise ValueError("capacities must be nonnegative")
        eid = len(self.to)
        self.head[u].append(eid)
        self.to.append(v)
        self.cap.append(float(cap))
        self.head[v].append(eid + 1)
        self.to.append(u)
        self.cap.append(float(cap_rev))
        return eid

    def _bfs(self, s: int, t: int, eps: float):
        level = [-1] * self.n
        level[s] = 0
        queue = [s]
        for u in queue:
            for eid in self.head[u]:
                v = self.to[eid]
                if level[v] < 0 and self.cap[eid] > eps:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _dfs(self, s: int, t: int, level, it, eps: float) -> float:
        # iterative blocking-flow walk; path holds the edge ids taken from s
        path = []
        u = s
        while True:
            if u == t:
                pushed = min(self.cap[eid] for eid in path)
                for eid in path:
                    self.cap[eid] -= pushed
                    self.cap[eid ^ 1] += pushed
                return pushed
            advanced = False
            while it[u] < len(self.head[u]):
                eid = self.head[u][it[u]]
                v = self.to[eid]
                if self.cap[eid] > eps and level[v] == level[u] + 1:
                    path.append(eid)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if advanced:
                continue
            if not path:
                return 0.0
            level[u] = -1  # dead end, prune
            eid = path.pop()
            u = self.to[eid ^ 1]
            it[u] += 1

    def max_flow(self, s: int, t: int) -> float:
        finite = [c for c in self.cap if math.isfinite(c) and c > 0]
        eps = 1e-12 * max(finite) if finite else 0.0
        total = 0.0
        while True:
            level = self._bfs(s, t, eps)
            if level is None:
                return total
            it = [0] * self.n
            while True:
                pushed = self._dfs(s, t, level, it, eps)
                if pushed <= 0:
                    break
                total += pushed

    def min_cut_side(self, s: int) -> set:
        """Source side of the min cut; call after max_flow."""
        finite = [c for c in self.cap if math.isfinite(c) and c > 0]
        eps = 1e-12 * max(finite) if finite else 0.0
        seen = {s}
        queue = [s]
        for u in queue:
            for eid in self.head[u]:
                v = self.to[eid]
                if v not in seen and self.cap[eid] > eps:
                    seen.add(v)
                    queue.append(v)
        return seen
