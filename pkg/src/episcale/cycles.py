"""Fundamental, minimum and null-filtered minimum cycle bases."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .graph import (
    Circuit,
    EpipolarGraph,
    GraphError,
    ShortestPaths,
    all_pairs_shortest_paths,
    biconnectivity_report,
    cycle_space_dimension,
    is_connected,
    is_spanning_tree,
    spanning_tree,
)
from .se3 import geodesic_distance, rotation_angles

DEFAULT_EPSILON_DEG = 2.0
FCB, MCB, NMCB = "FCB", "MCB", "N-MCB"


class BasisError(ValueError):
    """No usable cycle basis could be built."""


@dataclass
class CycleBasis:
    circuits: list[Circuit]
    kind: str
    m: int
    tree: tuple[int, ...] | None = None
    candidates_generated: int = 0
    candidates_discarded: int = 0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.circuits)

    def __iter__(self):
        return iter(self.circuits)

    @property
    def total_length(self) -> int:
        return sum(len(c) for c in self.circuits)

    def covered_edges(self) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        for c in self.circuits:
            mask[list(c.edges)] = True
        return mask

    def indicator_matrix(self, signed: bool = False) -> np.ndarray:
        """``r x m`` matrix of (signed) circuit indicator rows."""
        C = np.zeros((len(self.circuits), self.m))
        for k, c in enumerate(self.circuits):
            C[k, list(c.edges)] = c.signs if signed else 1
        return C

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "count": len(self.circuits),
            "total_length": self.total_length,
            "candidates_generated": self.candidates_generated,
            "candidates_discarded": self.candidates_discarded,
        }


def fundamental_cycle_basis(
    G: EpipolarGraph,
    tree: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
    tree_method: str = "bfs",
) -> CycleBasis:
    """One circuit per non-tree edge, closing the tree path between its endpoints.

    Without ``tree`` one is drawn with :func:`spanning_tree` using
    ``tree_method`` (BFS by default, randomized when ``rng`` is given).
    """
    if not is_connected(G):
        raise GraphError("fundamental cycle basis requires a connected graph")
    if tree is None:
        tree = spanning_tree(G, rng, tree_method)
    elif not is_spanning_tree(G, tree):
        raise GraphError("the given edge set is not a spanning tree")
    tree = tuple(sorted(int(e) for e in tree))
    in_tree = np.zeros(G.m, dtype=bool)
    in_tree[list(tree)] = True

    adj: list[list[int]] = [[] for _ in range(G.n)]
    for e in tree:
        i, j = G.edges[e]
        adj[i].append(j)
        adj[j].append(i)
    parent = [-1] * G.n
    depth = [-1] * G.n
    depth[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if depth[w] < 0:
                depth[w] = depth[u] + 1
                parent[w] = u
                queue.append(w)

    circuits = []
    for e in np.flatnonzero(~in_tree):
        x, y = G.edges[e]
        left, right = [x], [y]
        while left[-1] != right[-1]:
            if depth[left[-1]] >= depth[right[-1]]:
                left.append(parent[left[-1]])
            else:
                right.append(parent[right[-1]])
        # x .. lca .. y, closed by the non-tree edge y -> x
        verts = left + right[-2::-1]
        circuits.append(G.circuit(verts).canonical())
    return CycleBasis(circuits, FCB, G.m, tree=tree)


def _require_biconnected(G: EpipolarGraph):
    if not biconnectivity_report(G).is_biconnected:
        raise GraphError("Horton candidates require a biconnected graph")


def _candidate_pairs(G: EpipolarGraph, sp: ShortestPaths):
    """``(root, edge, length)`` for every non-degenerate Horton candidate."""
    ea = G.edge_array
    x, y = ea[:, 0], ea[:, 1]
    P, B = sp.parent, sp.branch
    valid = (B[:, x] != B[:, y]) & (P[:, y] != x) & (P[:, x] != y)
    roots, eids = np.nonzero(valid)
    lengths = sp.dist[roots, x[eids]] + sp.dist[roots, y[eids]] + G.edge_weights[eids]
    return roots, eids, lengths


def _candidate_vertices(G: EpipolarGraph, sp: ShortestPaths, v: int, e: int) -> list[int]:
    x, y = G.edges[e]
    if y == v:
        # weighted graphs: e touches the root but is not its shortest path
        x, y = y, x
    par = sp.parent[v]
    down = [x]
    while down[-1] != v:
        down.append(int(par[down[-1]]))
    down.reverse()
    up = [y]
    while par[up[-1]] != v:
        up.append(int(par[up[-1]]))
    return down + up


def _tree_depth(sp: ShortestPaths) -> np.ndarray:
    """Edge count of every tree path (equals ``dist`` when unweighted)."""
    if not sp.weighted:
        return np.asarray(sp.dist, dtype=np.int64)
    n = sp.parent.shape[0]
    depth = np.zeros((n, n), dtype=np.int64)
    for v in range(n):
        for x in sp.order[v][1:]:
            depth[v, x] = depth[v, sp.parent[v, x]] + 1
    return depth


def _path_rotations(G: EpipolarGraph, sp: ShortestPaths, depth: np.ndarray) -> np.ndarray:
    """``out[v, x]`` = product of traversed rotations along the tree path ``v -> x``."""
    n = G.n
    out = np.zeros((n, n, 3, 3))
    out[:, :] = np.eye(3)
    if not G.m:
        return out
    Rs = G.rotations
    lookup = G.edge_lookup
    for d in range(1, int(depth.max()) + 1):
        vs, xs = np.nonzero(depth == d)
        ps = sp.parent[vs, xs]
        es = lookup[ps, xs]
        forward = G.edge_array[es, 0] == ps
        step = np.where(forward[:, None, None], Rs[es], np.transpose(Rs[es], (0, 2, 1)))
        out[vs, xs] = out[vs, ps] @ step
    return out


def _candidate_angles(G, path_rot, roots, eids) -> np.ndarray:
    ea = G.edge_array
    x, y = ea[eids, 0], ea[eids, 1]
    Rc = path_rot[roots, x] @ G.rotations[eids] @ np.transpose(path_rot[roots, y], (0, 2, 1))
    return rotation_angles(Rc)


def _null_threshold(epsilon_deg: float, N) -> np.ndarray:
    thr = np.deg2rad(epsilon_deg) * np.sqrt(N)
    # inclusive comparison, tolerant to the last bits of the conversion
    return thr * (1.0 + 1e-12)


def horton_candidates(G: EpipolarGraph, weighted: bool = False) -> list[tuple[Circuit, float]]:
    """Deduplicated Horton candidates, sorted by (length, sorted edge ids)."""
    _require_biconnected(G)
    sp = all_pairs_shortest_paths(G, weighted=weighted)
    roots, eids, lengths = _candidate_pairs(G, sp)
    seen = {}
    for v, e, ln in zip(roots.tolist(), eids.tolist(), lengths.tolist()):
        c = G.circuit(_candidate_vertices(G, sp, v, e))
        key = tuple(sorted(c.edges))
        if key not in seen:
            seen[key] = (c.canonical(), ln)
    return [seen[k] for k in sorted(seen, key=lambda k: (seen[k][1], k))]


def select_independent(
    candidates: Sequence[tuple[Circuit, float]] | Sequence[Circuit],
    m: int,
    target: int | None = None,
    kind: str = MCB,
) -> CycleBasis:
    """Greedy GF(2)-independent selection in the given (length-sorted) order."""
    circuits = [c[0] if isinstance(c, tuple) else c for c in candidates]
    elim = kernels.Gf2Eliminator(m)
    chosen = []
    for c in circuits:
        if target is not None and elim.rank >= target:
            break
        if elim.insert(list(c.edges)):
            chosen.append(c)
    return CycleBasis(chosen, kind, m, candidates_generated=len(circuits))


def is_null_circuit(
    C: Circuit,
    G: EpipolarGraph,
    epsilon_deg: float = DEFAULT_EPSILON_DEG,
    metric: Callable = geodesic_distance,
) -> bool:
    """True iff the composed rotation around ``C`` is within ``epsilon * sqrt(N)`` of identity.

    ``epsilon_deg`` is in degrees and is converted to radians before the
    comparison, so ``metric`` must return radians.
    """
    R = np.eye(3)
    for e, s in zip(C.edges, C.signs):
        R = R @ (G.rotations[e] if s > 0 else G.rotations[e].T)
    return bool(metric(R, np.eye(3)) <= _null_threshold(epsilon_deg, len(C)))


def _horton_block(G: EpipolarGraph, epsilon_deg: float | None, weighted: bool, metric):
    """MCB (or N-MCB when ``epsilon_deg`` is set) of one biconnected graph."""
    sp = all_pairs_shortest_paths(G, weighted=weighted)
    roots, eids, lengths = _candidate_pairs(G, sp)
    target = cycle_space_dimension(G)
    grouping = np.round(lengths, 9) if weighted else lengths
    order = np.lexsort((eids, roots, grouping))
    path_rot = None
    if epsilon_deg is not None and metric is None:
        depth = _tree_depth(sp)
        path_rot = _path_rotations(G, sp, depth)

    elim = kernels.Gf2Eliminator(G.m)
    chosen: list[Circuit] = []
    seen: set[tuple[int, ...]] = set()
    discarded = 0
    start = 0
    total = len(order)
    while start < total and elim.rank < target:
        stop = start + int(np.searchsorted(grouping[order[start:]], grouping[order[start]], side="right"))
        idx = order[start:stop]
        start = stop
        if path_rot is not None:
            ends = G.edge_array[eids[idx]]
            N = depth[roots[idx], ends[:, 0]] + depth[roots[idx], ends[:, 1]] + 1
            keep = _candidate_angles(G, path_rot, roots[idx], eids[idx]) <= _null_threshold(epsilon_deg, N)
        else:
            keep = np.ones(len(idx), dtype=bool)
        group = {}
        for k, (v, e) in enumerate(zip(roots[idx].tolist(), eids[idx].tolist())):
            c = G.circuit(_candidate_vertices(G, sp, v, e))
            key = tuple(sorted(c.edges))
            if key in seen or key in group:
                continue
            if path_rot is None and epsilon_deg is not None:
                keep[k] = is_null_circuit(c, G, epsilon_deg, metric)
            if not keep[k]:
                discarded += 1
                seen.add(key)
                continue
            group[key] = c
        seen.update(group)
        keys = sorted(group)
        if not keys:
            continue
        indptr = np.zeros(len(keys) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(k) for k in keys])
        flat = np.fromiter((e for k in keys for e in k), dtype=np.int64, count=int(indptr[-1]))
        accepted = elim.insert_many(indptr, flat, target)
        chosen.extend(group[k].canonical() for k, ok in zip(keys, accepted) if ok)
    return chosen, total, discarded


def _horton_basis(G, epsilon_deg, weighted, metric, kind) -> CycleBasis:
    report = biconnectivity_report(G)
    circuits, generated, discarded = [], 0, 0
    if report.is_biconnected:
        blocks = [(G, np.arange(G.n), np.arange(G.m))]
    else:
        blocks = [G.subgraph(comp) for comp in report.components if len(comp) >= 3]
    for sub, vmap, _ in blocks:
        chosen, gen, disc = _horton_block(sub, epsilon_deg, weighted, metric)
        generated += gen
        discarded += disc
        for c in chosen:
            circuits.append(G.circuit([int(vmap[v]) for v in c.vertices]).canonical())
    circuits.sort(key=lambda c: (c.weight(G), sorted(c.edges)))
    return CycleBasis(
        circuits,
        kind,
        G.m,
        candidates_generated=generated,
        candidates_discarded=discarded,
        stats={"blocks": len(blocks)},
    )


def minimum_cycle_basis(G: EpipolarGraph, weighted: bool = False) -> CycleBasis:
    """Horton minimum cycle basis, computed per biconnected component."""
    return _horton_basis(G, None, weighted, None, MCB)


def null_filtered_mcb(
    G: EpipolarGraph,
    epsilon_deg: float = DEFAULT_EPSILON_DEG,
    weighted: bool = False,
    metric: Callable | None = None,
) -> CycleBasis:
    """Horton basis restricted to null circuits.

    Candidates whose composed rotation is farther than ``epsilon * sqrt(N)``
    from the identity are discarded before the independence test, so the
    basis generally covers only a consistent subgraph and may have fewer than
    ``m - n + 1`` circuits.
    """
    if not epsilon_deg > 0:
        raise ValueError("epsilon must be positive")
    basis = _horton_basis(G, epsilon_deg, weighted, metric, NMCB)
    if not basis.circuits:
        raise BasisError("no null circuit found: every candidate was discarded")
    return basis


def cycle_basis(G: EpipolarGraph, kind: str = "mcb", epsilon_deg: float = DEFAULT_EPSILON_DEG, **kw) -> CycleBasis:
    """Dispatch on ``kind`` in ``{"fcb", "mcb", "nmcb"}``."""
    kind = kind.lower().replace("-", "")
    if kind == "fcb":
        return fundamental_cycle_basis(G, **kw)
    if kind == "mcb":
        return minimum_cycle_basis(G, **kw)
    if kind == "nmcb":
        return null_filtered_mcb(G, epsilon_deg, **kw)
    raise ValueError(f"unknown basis kind {kind!r}")
