"""Pure-Python implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``EPISCALE_PURE_PYTHON=1`` is set.  Semantics match the compiled versions
exactly; the test-suite checks both against each other.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def bfs_all(indptr, indices, n: int):
    """Breadth-first search from every vertex.

    Neighbors are visited in the order stored in ``indices`` (ascending ids for
    a sorted CSR), which makes every tree path the lexicographically smallest
    shortest path from its root.

    Returns ``(parent, dist, branch, order)``, all ``(n, n)`` int32 arrays.
    ``branch[v, x]`` is the child of ``v`` on the tree path to ``x`` (``-1`` for
    ``x == v``); ``order[v]`` lists vertices in visiting order, padded with -1.
    Unreached entries are -1.
    """
    indptr = [int(k) for k in indptr]
    indices = [int(k) for k in indices]
    adj = [indices[indptr[u] : indptr[u + 1]] for u in range(n)]
    parent = np.full((n, n), -1, dtype=np.int32)
    dist = np.full((n, n), -1, dtype=np.int32)
    branch = np.full((n, n), -1, dtype=np.int32)
    order = np.full((n, n), -1, dtype=np.int32)
    for v in range(n):
        par = [-1] * n
        dst = [-1] * n
        br = [-1] * n
        seq = [v]
        dst[v] = 0
        queue = deque([v])
        while queue:
            u = queue.popleft()
            du = dst[u] + 1
            bu = br[u]
            for w in adj[u]:
                if dst[w] < 0:
                    dst[w] = du
                    par[w] = u
                    br[w] = w if u == v else bu
                    seq.append(w)
                    queue.append(w)
        parent[v] = par
        dist[v] = dst
        branch[v] = br
        order[v, : len(seq)] = seq
    return parent, dist, branch, order


class Gf2Eliminator:
    """Incremental GF(2) row echelon form, pivoting on the lowest set bit.

    Rows are Python integers used as packed bit vectors.
    """

    def __init__(self, m: int):
        self.m = int(m)
        self._pivots: dict[int, int] = {}

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def _reduce(self, x: int) -> int:
        pivots = self._pivots
        while x:
            p = pivots.get(x & -x)
            if p is None:
                return x
            x ^= p
        return 0

    def insert(self, edge_ids) -> bool:
        """Add a row given by its set bits; return True iff it was independent."""
        x = 0
        for e in edge_ids:
            x ^= 1 << int(e)
        x = self._reduce(x)
        if x:
            self._pivots[x & -x] = x
            return True
        return False

    def is_independent(self, edge_ids) -> bool:
        x = 0
        for e in edge_ids:
            x ^= 1 << int(e)
        return self._reduce(x) != 0

    def insert_many(self, indptr, ids, limit: int = -1):
        """Insert ``len(indptr) - 1`` rows in order, stopping once rank reaches ``limit``.

        Returns a boolean array marking the accepted rows.
        """
        count = len(indptr) - 1
        accepted = np.zeros(count, dtype=bool)
        for k in range(count):
            if 0 <= limit <= self.rank:
                break
            accepted[k] = self.insert(ids[indptr[k] : indptr[k + 1]])
        return accepted
