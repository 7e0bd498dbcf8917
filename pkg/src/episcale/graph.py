"""The epipolar graph and its combinatorial structure.

Vertices are ``0..n-1``.  Each undirected edge has a stored orientation
``(i, j)`` (input order) carrying the label ``M_ij``; the reversed label is
derived on demand with :func:`~episcale.se3.invert_relative`.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .se3 import RelativeMotion, invert_relative


class GraphError(ValueError):
    """Malformed graph or a graph lacking a required structural property."""


class EpipolarGraph:
    """Undirected simple graph with a relative motion per stored edge orientation."""

    def __init__(self, n: int, edges, labels, weights=None):
        self.n = int(n)
        self.edges = tuple((int(i), int(j)) for i, j in edges)
        self.labels = tuple(labels)
        self.m = len(self.edges)
        if len(self.labels) != self.m:
            raise GraphError("one label per edge required")
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        if self.weights is not None:
            if self.weights.shape != (self.m,):
                raise GraphError("one weight per edge required")
            if np.any(self.weights <= 0):
                raise GraphError("edge weights must be positive")
        index = {}
        for e, (i, j) in enumerate(self.edges):
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge {e} ({i}, {j}) has a vertex out of range")
            if i == j:
                raise GraphError(f"edge {e} is a self-loop at vertex {i}")
            key = (i, j) if i < j else (j, i)
            if key in index:
                raise GraphError(f"duplicate edge between {key[0]} and {key[1]}")
            index[key] = e
        self._index = index

    def __repr__(self):
        return f"EpipolarGraph(n={self.n}, m={self.m})"

    @cached_property
    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def edge_weights(self) -> np.ndarray:
        return np.ones(self.m) if self.weights is None else self.weights

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per vertex, ascending ``(neighbor, edge_id)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for e, (i, j) in enumerate(self.edges):
            adj[i].append((j, e))
            adj[j].append((i, e))
        for a in adj:
            a.sort()
        return adj

    @cached_property
    def csr(self):
        """Sorted CSR adjacency ``(indptr, indices, edge_ids)`` as int32 arrays."""
        counts = [len(a) for a in self.adjacency]
        indptr = np.zeros(self.n + 1, dtype=np.int32)
        indptr[1:] = np.cumsum(counts)
        indices = np.array([w for a in self.adjacency for w, _ in a], dtype=np.int32)
        eids = np.array([e for a in self.adjacency for _, e in a], dtype=np.int32)
        return indptr, indices, eids

    @cached_property
    def edge_lookup(self) -> np.ndarray:
        """Dense ``(n, n)`` table of edge ids, -1 where there is no edge."""
        table = np.full((self.n, self.n), -1, dtype=np.int64)
        if self.m:
            ea = self.edge_array
            table[ea[:, 0], ea[:, 1]] = np.arange(self.m)
            table[ea[:, 1], ea[:, 0]] = np.arange(self.m)
        return table

    @cached_property
    def rotations(self) -> np.ndarray:
        """Stored-orientation rotations, shape ``(m, 3, 3)``."""
        return np.array([lab.rotation for lab in self.labels]).reshape(-1, 3, 3)

    @cached_property
    def directions(self) -> np.ndarray:
        return np.array([lab.direction for lab in self.labels]).reshape(-1, 3)

    def has_edge(self, i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in self._index

    def edge_id(self, i: int, j: int) -> int:
        try:
            return self._index[(i, j) if i < j else (j, i)]
        except KeyError:
            raise GraphError(f"no edge between {i} and {j}") from None

    def orientation(self, i: int, j: int) -> int:
        """+1 if ``i -> j`` is the stored orientation, -1 otherwise."""
        return 1 if self.edges[self.edge_id(i, j)] == (i, j) else -1

    def label(self, i: int, j: int) -> RelativeMotion:
        """Relative motion ``M_ij`` for either orientation."""
        e = self.edge_id(i, j)
        lab = self.labels[e]
        return lab if self.edges[e] == (i, j) else invert_relative(lab)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def circuit(self, vertices: Sequence[int]) -> "Circuit":
        return Circuit.from_vertices(self, vertices)

    def with_labels(self, labels) -> "EpipolarGraph":
        """Same topology and orientations, new edge labels."""
        return EpipolarGraph(self.n, self.edges, labels, self.weights)

    def subgraph(self, edge_ids: Iterable[int]):
        """Edge-induced subgraph with compact vertex ids.

        Returns ``(graph, vertex_map, edge_map)`` where the maps send new ids to
        the ids of this graph.
        """
        edge_map = np.array(sorted(set(int(e) for e in edge_ids)), dtype=np.int64)
        verts = sorted({v for e in edge_map for v in self.edges[e]})
        relabel = {v: k for k, v in enumerate(verts)}
        sub = EpipolarGraph(
            len(verts),
            [(relabel[self.edges[e][0]], relabel[self.edges[e][1]]) for e in edge_map],
            [self.labels[e] for e in edge_map],
            None if self.weights is None else self.weights[edge_map],
        )
        return sub, np.array(verts, dtype=np.int64), edge_map


def build_graph(n: int, edges, weights=None) -> EpipolarGraph:
    """Build a graph from ``(i, j, RelativeMotion)`` triples; ``(i, j)`` is the stored orientation."""
    edges = list(edges)
    return EpipolarGraph(n, [(i, j) for i, j, _ in edges], [lab for _, _, lab in edges], weights)


@dataclass(frozen=True)
class Circuit:
    """A closed walk ``(i_1, ..., i_N)`` visiting each vertex once.

    ``edges[k]`` joins ``vertices[k]`` to ``vertices[k+1]`` (cyclically) and
    ``signs[k]`` is +1 when that traversal follows the stored orientation.
    """

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    signs: tuple[int, ...]

    @classmethod
    def from_vertices(cls, G: EpipolarGraph, vertices: Sequence[int]) -> "Circuit":
        verts = tuple(int(v) for v in vertices)
        if len(verts) < 3:
            raise GraphError("a circuit needs at least 3 vertices")
        if len(set(verts)) != len(verts):
            raise GraphError("circuit repeats a vertex")
        edges, signs = [], []
        for a, b in zip(verts, verts[1:] + verts[:1]):
            e = G.edge_id(a, b)
            edges.append(e)
            signs.append(1 if G.edges[e] == (a, b) else -1)
        return cls(verts, tuple(edges), tuple(signs))

    def __len__(self):
        return len(self.vertices)

    def reversed(self) -> "Circuit":
        """Same circuit traversed the other way round, starting at the same vertex."""
        v = (self.vertices[0],) + tuple(reversed(self.vertices[1:]))
        return Circuit(v, tuple(reversed(self.edges)), tuple(-s for s in reversed(self.signs)))

    def canonical(self) -> "Circuit":
        """Rotate to start at the smallest vertex, oriented towards the smaller neighbor."""
        k = self.vertices.index(min(self.vertices))
        c = Circuit(
            self.vertices[k:] + self.vertices[:k],
            self.edges[k:] + self.edges[:k],
            self.signs[k:] + self.signs[:k],
        )
        if c.vertices[1] > c.vertices[-1]:
            c = c.reversed()
        return c

    def weight(self, G: EpipolarGraph) -> float:
        return float(G.edge_weights[list(self.edges)].sum())

    def signed_indicator(self, m: int) -> np.ndarray:
        c = np.zeros(m)
        c[list(self.edges)] = self.signs
        return c


@dataclass(frozen=True)
class Gf2Vector:
    """Edge-indexed bit vector; ``bits`` packs edge ``e`` at bit ``e``."""

    bits: int
    length: int

    def __xor__(self, other: "Gf2Vector") -> "Gf2Vector":
        if self.length != other.length:
            raise GraphError("GF(2) vectors of different graphs")
        return Gf2Vector(self.bits ^ other.bits, self.length)

    def __bool__(self):
        return self.bits != 0

    def popcount(self) -> int:
        return bin(self.bits).count("1")

    def support(self) -> list[int]:
        return [e for e in range(self.length) if (self.bits >> e) & 1]

    @classmethod
    def zero(cls, length: int) -> "Gf2Vector":
        return cls(0, length)

    @classmethod
    def from_edges(cls, edges: Iterable[int], length: int) -> "Gf2Vector":
        bits = 0
        for e in edges:
            bits ^= 1 << int(e)
        return cls(bits, length)


def circuit_to_gf2(C: Circuit, m: int) -> Gf2Vector:
    return Gf2Vector.from_edges(C.edges, m)


def cycle_sum(a: Gf2Vector, b: Gf2Vector) -> Gf2Vector:
    """Symmetric difference of two edge sets."""
    return a ^ b


def gf2_rank(vectors: Sequence[Gf2Vector] | Sequence[Sequence[int]], m: int) -> int:
    elim = kernels.Gf2Eliminator(m)
    for v in vectors:
        elim.insert(v.support() if isinstance(v, Gf2Vector) else list(v))
    return elim.rank


def connected_components(G: EpipolarGraph) -> list[list[int]]:
    """Vertex sets of the connected components, each sorted, ordered by smallest vertex."""
    seen = [False] * G.n
    comps = []
    for s in range(G.n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for w, _ in G.adjacency[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(G: EpipolarGraph) -> bool:
    return G.n > 0 and len(connected_components(G)) == 1


def cycle_space_dimension(G: EpipolarGraph) -> int:
    return G.m - G.n + len(connected_components(G))


@dataclass
class BiconnectivityReport:
    articulation_points: list[int]
    bridges: list[int]
    components: list[tuple[int, ...]]  # edge ids per biconnected component
    connected: bool
    largest: EpipolarGraph | None = None
    largest_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    largest_edges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def is_biconnected(self) -> bool:
        """Connected, at least 3 vertices, no articulation point and no bridge."""
        return (
            self.connected
            and len(self.components) == 1
            and not self.articulation_points
            and not self.bridges
            and len(self.components[0]) >= 3
        )


def _tarjan(G: EpipolarGraph):
    n = G.n
    disc = [-1] * n
    low = [0] * n
    articulation, bridges, components = set(), [], []
    edge_stack: list[int] = []
    t = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = t
        t += 1
        root_children = 0
        stack = [(root, -1, iter(G.adjacency[root]))]
        while stack:
            u, pe, it = stack[-1]
            descended = False
            for w, e in it:
                if e == pe:
                    continue
                if disc[w] < 0:
                    edge_stack.append(e)
                    disc[w] = low[w] = t
                    t += 1
                    stack.append((w, e, iter(G.adjacency[w])))
                    descended = True
                    break
                if disc[w] < disc[u]:
                    edge_stack.append(e)
                    low[u] = min(low[u], disc[w])
            if descended:
                continue
            stack.pop()
            if not stack:
                break
            p = stack[-1][0]
            low[p] = min(low[p], low[u])
            if low[u] > disc[p]:
                bridges.append(pe)
            if low[u] >= disc[p]:
                comp = []
                while True:
                    e = edge_stack.pop()
                    comp.append(e)
                    if e == pe:
                        break
                components.append(tuple(sorted(comp)))
                if p == root:
                    root_children += 1
                else:
                    articulation.add(p)
        if root_children > 1:
            articulation.add(root)
    return sorted(articulation), sorted(bridges), components


def biconnectivity_report(G: EpipolarGraph) -> BiconnectivityReport:
    """Articulation points, bridges and biconnected components (as edge-id sets).

    The largest component is the one with most edges; ties go to the component
    containing the smallest vertex id.
    """
    art, bridges, comps = _tarjan(G)

    def min_vertex(comp):
        return min(v for e in comp for v in G.edges[e])

    comps.sort(key=lambda c: (min_vertex(c), c))
    report = BiconnectivityReport(art, bridges, comps, is_connected(G))
    if comps:
        best = min(comps, key=lambda c: (-len(c), min_vertex(c)))
        report.largest, report.largest_vertices, report.largest_edges = G.subgraph(best)
    return report


def is_biconnected(G: EpipolarGraph) -> bool:
    return biconnectivity_report(G).is_biconnected


TREE_METHODS = ("bfs", "uniform")


def spanning_tree(
    G: EpipolarGraph, rng: np.random.Generator | None = None, method: str = "bfs"
) -> tuple[int, ...]:
    """Edge ids of a spanning tree.

    ``bfs`` is deterministic (root 0, ascending neighbors) unless ``rng`` is
    given, in which case the root and every neighbor order are randomized.
    ``uniform`` samples uniformly among all spanning trees (Wilson's
    loop-erased random walks) and needs ``rng``.
    """
    if method not in TREE_METHODS:
        raise ValueError(f"unknown tree method {method!r}")
    if not is_connected(G):
        raise GraphError("spanning tree requires a connected graph")
    if method == "uniform":
        if rng is None:
            raise ValueError("uniform spanning trees need an rng")
        return _wilson_tree(G, rng)
    root = 0 if rng is None else int(rng.integers(G.n))
    seen = [False] * G.n
    seen[root] = True
    tree = []
    queue = deque([root])
    while queue:
        u = queue.popleft()
        nbrs = G.adjacency[u]
        if rng is not None:
            nbrs = [nbrs[k] for k in rng.permutation(len(nbrs))]
        for w, e in nbrs:
            if not seen[w]:
                seen[w] = True
                tree.append(e)
                queue.append(w)
    return tuple(sorted(tree))


def _wilson_tree(G: EpipolarGraph, rng: np.random.Generator) -> tuple[int, ...]:
    root = int(rng.integers(G.n))
    in_tree = [False] * G.n
    in_tree[root] = True
    step = [-1] * G.n  # edge id taken out of each vertex on the last walk
    for start in rng.permutation(G.n):
        u = int(start)
        while not in_tree[u]:
            nbrs = G.adjacency[u]
            w, e = nbrs[int(rng.integers(len(nbrs)))]
            step[u] = e
            u = w
        u = int(start)
        while not in_tree[u]:
            in_tree[u] = True
            i, j = G.edges[step[u]]
            u = j if i == u else i
    return tuple(sorted(step[u] for u in range(G.n) if u != root))


def is_spanning_tree(G: EpipolarGraph, tree: Iterable[int]) -> bool:
    tree = list(tree)
    if len(tree) != G.n - 1 or len(set(tree)) != len(tree):
        return False
    if any(not 0 <= e < G.m for e in tree):
        return False
    sub = EpipolarGraph(G.n, [G.edges[e] for e in tree], [G.labels[e] for e in tree])
    return is_connected(sub)


class ShortestPaths:
    """All-pairs shortest-path trees.

    ``parent[v]``, ``dist[v]``, ``branch[v]`` describe the shortest-path tree
    rooted at ``v``; ``order[v]`` is a topological (visit) order of that tree.
    Ties are broken towards the lexicographically smallest vertex sequence.
    """

    def __init__(self, parent, dist, branch, order, weighted: bool):
        self.parent = parent
        self.dist = dist
        self.branch = branch
        self.order = order
        self.weighted = weighted

    def path(self, x: int, y: int) -> list[int]:
        """Vertex sequence of the shortest path from ``x`` to ``y``."""
        if self.dist[x, y] < 0:
            raise GraphError(f"{y} is unreachable from {x}")
        seq = [y]
        par = self.parent[x]
        while seq[-1] != x:
            seq.append(int(par[seq[-1]]))
        seq.reverse()
        return seq

    def length(self, x: int, y: int):
        return self.dist[x, y]


def _dijkstra_lex(G: EpipolarGraph, source: int):
    n = G.n
    w = G.edge_weights
    best: list[tuple | None] = [None] * n
    heap = [(0.0, (source,))]
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if best[u] is not None:
            continue
        best[u] = (d, path)
        for x, e in G.adjacency[u]:
            if best[x] is None:
                heapq.heappush(heap, (d + w[e], path + (x,)))
    return best


def all_pairs_shortest_paths(G: EpipolarGraph, weighted: bool = False) -> ShortestPaths:
    """Shortest-path trees from every vertex; edge counts unless ``weighted``."""
    if not is_connected(G):
        raise GraphError("shortest paths require a connected graph")
    if not weighted:
        indptr, indices, _ = G.csr
        parent, dist, branch, order = kernels.bfs_all(indptr, indices, G.n)
        return ShortestPaths(parent, dist, branch, order, weighted=False)
    n = G.n
    parent = np.full((n, n), -1, dtype=np.int32)
    branch = np.full((n, n), -1, dtype=np.int32)
    order = np.full((n, n), -1, dtype=np.int32)
    dist = np.zeros((n, n))
    for v in range(n):
        best = _dijkstra_lex(G, v)
        for x, (d, path) in enumerate(best):
            dist[v, x] = d
            if len(path) > 1:
                parent[v, x] = path[-2]
                branch[v, x] = path[1]
        order[v] = sorted(range(n), key=lambda x: (best[x][0], len(best[x][1])))
    return ShortestPaths(parent, dist, branch, order, weighted=True)
