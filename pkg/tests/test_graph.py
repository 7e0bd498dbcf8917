from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import BOWTIE, zero_based
from episcale.graph import (
    Circuit,
    EpipolarGraph,
    Gf2Vector,
    GraphError,
    all_pairs_shortest_paths,
    biconnectivity_report,
    circuit_to_gf2,
    connected_components,
    cycle_space_dimension,
    cycle_sum,
    gf2_rank,
    is_spanning_tree,
    spanning_tree,
)
from episcale.se3 import RelativeMotion, random_rotation, random_unit_vector


def topology(n, pairs, weights=None):
    lab = RelativeMotion(np.eye(3), np.array([1.0, 0.0, 0.0]))
    return EpipolarGraph(n, pairs, [lab] * len(pairs), weights)


def to_nx(G):
    H = nx.Graph()
    H.add_nodes_from(range(G.n))
    for e, (i, j) in enumerate(G.edges):
        H.add_edge(i, j, eid=e, weight=float(G.edge_weights[e]))
    return H


@st.composite
def graphs(draw, max_n=9):
    n = draw(st.integers(2, max_n))
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(all_pairs), max_size=len(all_pairs)))
    return topology(n, [p for p, keep in zip(all_pairs, mask) if keep])


@st.composite
def connected_graphs(draw, max_n=9):
    n = draw(st.integers(3, max_n))
    # random tree plus random extra edges
    pairs = {tuple(sorted((v, draw(st.integers(0, v - 1))))) for v in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    pairs |= {tuple(sorted(p)) for p in extra if p[0] != p[1]}
    return topology(n, sorted(pairs))


class TestEpipolarGraph:
    def test_validation(self):
        with pytest.raises(GraphError):
            topology(3, [(0, 0)])
        with pytest.raises(GraphError):
            topology(3, [(0, 1), (1, 0)])
        with pytest.raises(GraphError):
            topology(3, [(0, 3)])
        with pytest.raises(GraphError):
            topology(3, [(0, 1)], weights=[0.0])

    def test_label_inverts_reversed_orientation(self):
        rng = np.random.default_rng(0)
        M = RelativeMotion(random_rotation(rng), random_unit_vector(rng))
        G = EpipolarGraph(2, [(0, 1)], [M])
        assert G.label(0, 1) is M
        back = G.label(1, 0)
        assert np.allclose(back.rotation, M.rotation.T)
        assert np.allclose(back.direction, -M.rotation.T @ M.direction)
        assert G.orientation(0, 1) == 1 and G.orientation(1, 0) == -1

    def test_subgraph_maps(self):
        G = topology(5, zero_based(BOWTIE))
        sub, vmap, emap = G.subgraph([3, 4, 5])
        assert sub.n == 3 and sub.m == 3
        for k, (i, j) in enumerate(sub.edges):
            assert G.edges[emap[k]] == (vmap[i], vmap[j])


class TestCircuit:
    def test_from_vertices(self):
        G = topology(4, [(0, 1), (2, 1), (2, 3), (0, 3)])
        C = G.circuit([0, 1, 2, 3])
        assert C.edges == (0, 1, 2, 3)
        assert C.signs == (1, -1, 1, -1)
        assert C.reversed().signs == (1, -1, 1, -1)

    def test_invalid(self):
        G = topology(4, [(0, 1), (1, 2), (2, 3)])
        with pytest.raises(GraphError):
            G.circuit([0, 1, 2])
        with pytest.raises(GraphError):
            G.circuit([0, 1])
        with pytest.raises(GraphError):
            G.circuit([0, 1, 0])

    def test_canonical_is_rotation_and_direction_invariant(self):
        G = topology(5, [(i, (i + 1) % 5) for i in range(5)])
        ref = G.circuit([0, 1, 2, 3, 4]).canonical()
        for start in range(5):
            verts = [(start + k) % 5 for k in range(5)]
            assert G.circuit(verts).canonical() == ref
            assert G.circuit(verts[::-1]).canonical() == ref
        assert ref.vertices == (0, 1, 2, 3, 4)

    def test_signed_indicator_sum_cancels_shared_edge(self):
        # two triangles sharing edge (0, 2), traversed in opposite directions
        G = topology(4, [(0, 1), (1, 2), (0, 2), (2, 3), (0, 3)])
        c1 = G.circuit([0, 1, 2]).signed_indicator(G.m)
        c2 = G.circuit([0, 2, 3]).signed_indicator(G.m)
        c3 = G.circuit([0, 1, 2, 3]).signed_indicator(G.m)
        assert np.array_equal(c1 + c2, c3)


class TestGf2:
    def test_vector_ops(self):
        a = Gf2Vector.from_edges([0, 2, 3], 5)
        b = Gf2Vector.from_edges([2, 4], 5)
        assert (a ^ b).support() == [0, 3, 4]
        assert cycle_sum(a, a) == Gf2Vector.zero(5)
        assert a.popcount() == 3

    def test_rank(self):
        assert gf2_rank([[0, 1], [1, 2], [0, 2]], 3) == 2
        assert gf2_rank([[0], [1], [2]], 3) == 3
        assert gf2_rank([], 3) == 0

    def test_circuit_vector(self):
        G = topology(3, [(0, 1), (1, 2), (0, 2)])
        assert circuit_to_gf2(G.circuit([0, 1, 2]), 3).support() == [0, 1, 2]


class TestBiconnectivity:
    def test_bowtie(self):
        G = topology(5, zero_based(BOWTIE))
        r = biconnectivity_report(G)
        assert r.articulation_points == [1]
        assert r.bridges == []
        assert sorted(r.components) == [(0, 1, 2), (3, 4, 5)]
        assert not r.is_biconnected

    def test_triangle(self):
        r = biconnectivity_report(topology(3, [(0, 1), (1, 2), (0, 2)]))
        assert r.articulation_points == [] and r.bridges == [] and r.is_biconnected

    def test_path(self):
        r = biconnectivity_report(topology(4, [(0, 1), (1, 2), (2, 3)]))
        assert r.articulation_points == [1, 2]
        assert sorted(r.bridges) == [0, 1, 2]
        assert not r.is_biconnected

    def test_largest_component_tie_break(self):
        # two triangles joined by a bridge: equal size, the one with vertex 0 wins
        G = topology(6, [(3, 4), (4, 5), (3, 5), (0, 1), (1, 2), (0, 2), (2, 3)])
        r = biconnectivity_report(G)
        assert list(r.largest_vertices) == [0, 1, 2]
        assert r.bridges == [6]

    @settings(max_examples=150, deadline=None)
    @given(graphs())
    def test_matches_networkx(self, G):
        H = to_nx(G)
        r = biconnectivity_report(G)
        assert r.articulation_points == sorted(nx.articulation_points(H))
        expected_bridges = sorted(H.edges[u, v]["eid"] for u, v in nx.bridges(H))
        assert sorted(r.bridges) == expected_bridges
        expected = sorted(tuple(sorted(H.edges[u, v]["eid"] for u, v in comp)) for comp in nx.biconnected_component_edges(H))
        assert sorted(r.components) == expected
        if G.m:
            want = nx.is_biconnected(H) and G.m >= 3
            assert r.is_biconnected == want

    @settings(max_examples=100, deadline=None)
    @given(graphs())
    def test_components_and_dimension(self, G):
        H = to_nx(G)
        comps = connected_components(G)
        assert sorted(comps) == sorted(sorted(c) for c in nx.connected_components(H))
        assert cycle_space_dimension(G) == G.m - G.n + nx.number_connected_components(H)


class TestSpanningTree:
    def test_tree_input_is_itself(self):
        G = topology(5, [(0, 1), (1, 2), (1, 3), (3, 4)])
        assert spanning_tree(G) == (0, 1, 2, 3)

    def test_path_tree_of_five_vertex_example(self):
        G = topology(5, zero_based([(1, 2), (2, 3), (3, 4), (4, 5), (1, 3), (2, 4), (3, 5), (1, 5)]))
        tree = [G.edge_id(i, j) for i, j in zero_based([(1, 2), (2, 3), (3, 4), (4, 5)])]
        assert is_spanning_tree(G, tree)

    def test_deterministic_bfs(self):
        G = topology(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
        assert spanning_tree(G) == spanning_tree(G)
        assert spanning_tree(G) == (0, 3, 4)

    def test_disconnected_raises(self):
        with pytest.raises(GraphError):
            spanning_tree(topology(4, [(0, 1), (2, 3)]))

    def test_uniform_needs_rng(self):
        with pytest.raises(ValueError):
            spanning_tree(topology(3, [(0, 1), (1, 2), (0, 2)]), method="uniform")

    @settings(max_examples=60, deadline=None)
    @given(connected_graphs(), st.integers(0, 2**32 - 1), st.sampled_from(["bfs", "uniform"]))
    def test_random_trees_are_spanning(self, G, seed, method):
        assert is_spanning_tree(G, spanning_tree(G, np.random.default_rng(seed), method))

    def test_uniform_distribution_on_k4(self):
        # Cayley: K4 has 16 spanning trees, each should appear with frequency 1/16
        G = topology(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        rng = np.random.default_rng(1)
        draws = 16000
        counts = Counter(spanning_tree(G, rng, "uniform") for _ in range(draws))
        assert len(counts) == 16
        freq = np.array(list(counts.values())) / draws
        assert np.all(np.abs(freq - 1 / 16) < 0.012)


class TestShortestPaths:
    @settings(max_examples=80, deadline=None)
    @given(connected_graphs())
    def test_bfs_against_networkx(self, G):
        sp = all_pairs_shortest_paths(G)
        ref = dict(nx.all_pairs_shortest_path_length(to_nx(G)))
        for v in range(G.n):
            for x in range(G.n):
                assert sp.dist[v, x] == ref[v][x]
                path = sp.path(v, x)
                assert path[0] == v and path[-1] == x and len(path) == ref[v][x] + 1
                assert all(G.has_edge(a, b) for a, b in zip(path, path[1:]))

    @settings(max_examples=40, deadline=None)
    @given(connected_graphs(), st.integers(0, 2**32 - 1))
    def test_weighted_against_networkx(self, G, seed):
        w = np.random.default_rng(seed).uniform(0.5, 2.0, G.m)
        G = topology(G.n, G.edges, w)
        sp = all_pairs_shortest_paths(G, weighted=True)
        ref = dict(nx.all_pairs_dijkstra_path_length(to_nx(G)))
        for v in range(G.n):
            for x in range(G.n):
                assert np.isclose(sp.dist[v, x], ref[v][x])

    def test_branch_is_first_hop(self):
        G = topology(5, [(0, 1), (1, 2), (0, 3), (3, 4)])
        sp = all_pairs_shortest_paths(G)
        assert sp.branch[0, 2] == 1 and sp.branch[0, 4] == 3

    def test_lexicographic_ties(self):
        # square 0-1-2-3-0: both routes 0->2 have length 2, the one through 1 wins
        G = topology(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        assert all_pairs_shortest_paths(G).path(0, 2) == [0, 1, 2]

    def test_disconnected_raises(self):
        with pytest.raises(GraphError):
            all_pairs_shortest_paths(topology(4, [(0, 1), (2, 3)]))
