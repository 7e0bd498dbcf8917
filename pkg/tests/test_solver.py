import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import (
    BOWTIE,
    FIVE_CIRCUIT_CIRCUITS,
    FIVE_CIRCUIT_GRAPH,
    random_scene,
    scale_agreement,
    sequence_pairs,
    single_circuit,
    solvable_scene,
    zero_based,
)
from episcale.cycles import CycleBasis, fundamental_cycle_basis, minimum_cycle_basis, null_filtered_mcb
from episcale.graph import EpipolarGraph, GraphError
from episcale.se3 import AbsolutePose, GeometryError, RelativeMotion, random_rotation, relative_from_absolute, rotation_about
from episcale.solver import (
    EXACT_GAP,
    SPARSE_MIN_COLUMNS,
    _dense_spectrum,
    assemble,
    bearing_constraint_matrix,
    bearing_vectors,
    check_solvability,
    circuit_constraint_block,
    counting_condition,
    estimate_scales,
    numerical_rank,
    solve_scales,
    zeller_faugeras_ratio,
)
from episcale.synth import NoiseModel, corrupt, relative_mean_error

seeds = st.integers(0, 2**32 - 1)


def block_rank(system):
    return numerical_rank(system.A, 1e-8)


class TestConstraintBlock:
    def test_true_scales_in_null_space(self):
        scene, system = single_circuit(np.random.default_rng(1).standard_normal((3, 3)))
        assert system.A.shape == (3, 3)
        assert np.abs(system.A @ scene.scales).max() < 1e-10

    def test_nonzeros_per_block(self):
        scene = solvable_scene(10, 0.3, 2)
        basis = minimum_cycle_basis(scene.graph)
        system = assemble(basis, scene.graph)
        for k, C in enumerate(basis.circuits):
            assert system.A[3 * k : 3 * k + 3].nnz == 3 * len(C)

    def test_orientation_independent(self):
        # flipping a stored orientation (and its label) leaves the constraint unchanged
        scene = random_scene(4, [(0, 1), (1, 2), (2, 3), (3, 0)], np.random.default_rng(3), flip=False)
        G = scene.graph
        C = G.circuit([0, 1, 2, 3])
        flipped = EpipolarGraph(4, [(1, 0)] + list(G.edges[1:]), [G.labels[0].inverse()] + list(G.labels[1:]))
        a = circuit_constraint_block(C, G).toarray()
        b = circuit_constraint_block(flipped.circuit([0, 1, 2, 3]), flipped).toarray()
        assert np.allclose(a, b, atol=1e-12)

    def test_reversed_traversal_spans_same_constraint(self):
        scene, _ = single_circuit(np.random.default_rng(4).standard_normal((4, 3)))
        G = scene.graph
        C = G.circuit(range(4))
        a = circuit_constraint_block(C, G).toarray()
        b = circuit_constraint_block(C.reversed(), G).toarray()
        assert np.abs(b @ scene.scales).max() < 1e-10
        assert numerical_rank(np.vstack([a, b])) == numerical_rank(a)

    def test_missing_edge(self):
        scene, _ = single_circuit(np.eye(3))
        small = EpipolarGraph(3, scene.graph.edges[:2], scene.graph.labels[:2])
        with pytest.raises(GraphError):
            circuit_constraint_block(scene.graph.circuit([0, 1, 2]), small)


class TestRankLaws:
    def test_triangle_rank_two_unique(self):
        _, system = single_circuit([[0, 0, 0], [1, 0, 0], [0.3, 1, 0.2]])
        assert block_rank(system) == 2
        assert check_solvability(system.graph, system).verdict == "unique"

    def test_collinear_triangle_rank_one(self):
        _, system = single_circuit([[0, 0, 0], [1, 1, 1], [3, 3, 3]])
        assert block_rank(system) == 1
        assert check_solvability(system.graph, system).verdict == "multiple"

    def test_four_cycle_general_rank_three(self):
        _, system = single_circuit([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0.2, 0.4, 1.5]])
        assert block_rank(system) == 3
        assert check_solvability(system.graph, system).verdict == "unique"

    def test_four_cycle_coplanar_rank_two(self):
        _, system = single_circuit([[0, 0, 0], [1, 0, 0], [1.3, 1, 0], [0.1, 0.8, 0]])
        assert block_rank(system) == 2
        assert check_solvability(system.graph, system).verdict == "multiple"

    @pytest.mark.parametrize("N", [5, 6, 8])
    def test_long_cycle_multiple(self, N):
        _, system = single_circuit(np.random.default_rng(N).standard_normal((N, 3)))
        assert block_rank(system) == 3
        assert check_solvability(system.graph, system).verdict == "multiple"

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(3, 7))
    def test_rank_at_most_three(self, seed, N):
        _, system = single_circuit(np.random.default_rng(seed).standard_normal((N, 3)), seed)
        assert block_rank(system) <= 3


class TestExampleGraphs:
    def test_five_circuit_graph_unique(self):
        rng = np.random.default_rng(5)
        scene = random_scene(7, zero_based(FIVE_CIRCUIT_GRAPH), rng)
        G = scene.graph
        basis = CycleBasis([G.circuit([v - 1 for v in c]) for c in FIVE_CIRCUIT_CIRCUITS], "FCB", G.m)
        system = assemble(basis, G)
        assert system.A.shape == (12, 10)
        report = check_solvability(G, system)
        assert report.verdict == "unique" and report.biconnected and report.solvable
        sol = solve_scales(system)
        assert relative_mean_error(scene.scales, sol.scales) < 1e-8

    def test_bowtie_rank_deficient_by_two(self):
        scene = random_scene(5, zero_based(BOWTIE), np.random.default_rng(6))
        G = scene.graph
        system = assemble(minimum_cycle_basis(G), G)
        assert numerical_rank(system.A) == G.m - 2
        report = check_solvability(G, system)
        assert report.verdict == "multiple"
        assert report.articulation_points == [1] and not report.biconnected


class TestSolve:
    @pytest.mark.parametrize("kind", ["fcb", "mcb", "nmcb"])
    def test_exact_recovery_n20(self, kind):
        scene = solvable_scene(20, 0.5, 7)
        sol, basis, _ = estimate_scales(scene.graph, kind)
        assert sol.report.verdict == "unique"
        assert relative_mean_error(scene.scales, sol.scales) < 1e-8
        assert not sol.anomalies.any()
        assert np.isclose(np.linalg.norm(sol.scales), 1.0)

    def test_equilateral_triangle(self):
        _, system = single_circuit([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]])
        sol = solve_scales(system)
        assert np.allclose(sol.scales, np.ones(3) / np.sqrt(3), atol=1e-12)

    def test_sign_positive_and_anomalies(self):
        scene = solvable_scene(12, 0.3, 8)
        sol, _, _ = estimate_scales(scene.graph, "mcb")
        assert sol.scales.sum() > 0 and np.all(sol.scales > 0)
        observed, _ = corrupt(scene, NoiseModel(0.0, 0.3, seed=1), np.random.default_rng(1))
        noisy, _, _ = estimate_scales(observed, "mcb", gap_threshold=1e-2)
        assert noisy.scales.sum() > 0
        assert np.array_equal(noisy.anomalies, noisy.scales <= 0)

    def test_sparse_path_matches_dense(self):
        scene = solvable_scene(30, 0.4, 9)
        observed, _ = corrupt(scene, NoiseModel(1.0), np.random.default_rng(2))
        system = assemble(minimum_cycle_basis(observed), observed)
        assert system.m >= SPARSE_MIN_COLUMNS
        sol = solve_scales(system, certify=False)
        assert sol.method == "sparse"
        dense = _dense_spectrum(system.active_matrix)
        x = dense.null_vector * np.sign(dense.null_vector.sum())
        assert np.allclose(sol.scales, x, atol=1e-8)
        assert np.isclose(sol.sigma_min, dense.sigma_min, rtol=1e-6, atol=1e-12)
        assert np.isclose(sol.sigma_second, dense.sigma_second, rtol=1e-6)

    def test_null_filtered_leaves_uncovered_edges_nan(self):
        rng = np.random.default_rng(10)
        scene = random_scene(7, [(i, j) for i in range(7) for j in range(i + 1, 7)], rng)
        labels = list(scene.graph.labels)
        labels[3] = RelativeMotion(rotation_about([0, 1.0, 0], 0.5) @ labels[3].rotation, labels[3].direction)
        G = EpipolarGraph(7, scene.graph.edges, labels)
        basis = null_filtered_mcb(G, 2.0)
        sol = solve_scales(assemble(basis, G))
        assert np.isnan(sol.scales[3]) and sol.recovered.sum() == G.m - 1
        ok = sol.recovered
        assert relative_mean_error(scene.scales[ok], sol.scales[ok]) < 1e-8

    def test_needs_two_columns(self):
        G = EpipolarGraph(2, [(0, 1)], [RelativeMotion(np.eye(3), [1.0, 0, 0])])
        basis = CycleBasis([], "FCB", 1)
        with pytest.raises(GraphError):
            assemble(basis, G)

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_basis_independence(self, seed):
        rng = np.random.default_rng(seed)
        scene = solvable_scene(int(rng.integers(6, 16)), float(rng.uniform(0.1, 0.5)), seed)
        G = scene.graph
        ref = solve_scales(assemble(minimum_cycle_basis(G), G), certify=False).scales
        for _ in range(3):
            fcb = fundamental_cycle_basis(G, rng=rng, tree_method="uniform")
            x = solve_scales(assemble(fcb, G), certify=False).scales
            assert scale_agreement(x, ref) < 1e-8

    def test_residual_grows_with_noise(self):
        means = []
        for sigma in (0.5, 2.0, 5.0):
            res = []
            for t in range(5):
                rng = np.random.default_rng(100 + t)
                scene = solvable_scene(15, 0.4, 100 + t)
                observed, _ = corrupt(scene, NoiseModel(sigma), rng)
                res.append(estimate_scales(observed, "mcb", gap_threshold=1e-2)[0].residual)
            means.append(np.mean(res))
        assert means[0] < means[1] < means[2]


def test_counting_condition():
    assert counting_condition(3, 3)
    assert counting_condition(4, 4) and not counting_condition(4, 3)
    assert counting_condition(100, 148) and not counting_condition(100, 147)
    for n in range(3, 60):
        m_min = int(np.ceil(3 * n / 2)) - 2
        assert counting_condition(n, m_min) and not counting_condition(n, m_min - 1)


class TestZellerFaugeras:
    def triangle(self, rng, scale=1.0):
        P = [AbsolutePose.from_center(random_rotation(rng), scale * rng.standard_normal(3)) for _ in range(3)]
        (M12, a12), (M1i, a1i), (M2i, a2i) = (
            relative_from_absolute(P[0], P[1]),
            relative_from_absolute(P[0], P[2]),
            relative_from_absolute(P[1], P[2]),
        )
        return M12, M1i, M2i, a12 / a1i

    def test_true_ratio(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            M12, M1i, M2i, truth = self.triangle(rng)
            got = zeller_faugeras_ratio(M12.rotation, M12.direction, M1i.direction, M2i.direction)
            assert abs(got - truth) < 1e-10 * max(1.0, truth)

    def test_scale_free(self):
        a = self.triangle(np.random.default_rng(12))
        b = self.triangle(np.random.default_rng(12), scale=7.5)
        r = [zeller_faugeras_ratio(M12.rotation, M12.direction, M1i.direction, M2i.direction)
             for M12, M1i, M2i, _ in (a, b)]
        assert np.isclose(r[0], r[1], rtol=1e-12)

    def test_collinear_raises(self):
        d = np.array([1.0, 0, 0])
        with pytest.raises(GeometryError):
            zeller_faugeras_ratio(np.eye(3), d, d, d)


class TestBearingForm:
    def test_null_space_matches(self):
        scene = solvable_scene(12, 0.3, 13)
        G = scene.graph
        basis = minimum_cycle_basis(G)
        A = assemble(basis, G).A.toarray()
        K = bearing_constraint_matrix(scene.absolute_rotations, G, basis).toarray()
        assert K.shape == A.shape
        x = np.linalg.svd(A)[2][-1]
        y = np.linalg.svd(K)[2][-1]
        assert abs(abs(x @ y) - 1.0) < 1e-8

    def test_block_identity(self):
        # the translation block equals -R_{v1} times the bearing block of each circuit
        scene = solvable_scene(10, 0.3, 14)
        G = scene.graph
        basis = minimum_cycle_basis(G)
        A = assemble(basis, G).A.toarray()
        K = bearing_constraint_matrix(scene.absolute_rotations, G, basis).toarray()
        for k, C in enumerate(basis.circuits):
            R1 = scene.poses[C.vertices[0]].rotation
            assert np.allclose(A[3 * k : 3 * k + 3], -R1 @ K[3 * k : 3 * k + 3], atol=1e-12)

    def test_single_circuit_form(self):
        scene, _ = single_circuit(np.random.default_rng(15).standard_normal((4, 3)))
        G = scene.graph
        C = G.circuit(range(4))
        basis = CycleBasis([C], "FCB", G.m)
        K = bearing_constraint_matrix(scene.absolute_rotations, G, basis).toarray()
        B = bearing_vectors(scene.absolute_rotations, G)
        assert np.allclose(K, B @ np.diag(C.signed_indicator(G.m)))

    def test_row_sum_law(self):
        # triangles (0,1,2) and (0,2,3) share (0,2) in opposite directions; their sum is (0,1,2,3)
        rng = np.random.default_rng(16)
        scene = random_scene(4, [(0, 1), (1, 2), (0, 2), (2, 3), (0, 3)], rng)
        G = scene.graph
        C1, C2, C3 = G.circuit([0, 1, 2]), G.circuit([0, 2, 3]), G.circuit([0, 1, 2, 3])
        K = bearing_constraint_matrix(scene.absolute_rotations, G, CycleBasis([C1, C2, C3], "FCB", G.m)).toarray()
        assert np.allclose(K[0:3] + K[3:6], K[6:9], atol=1e-14)
        # appending the dependent circuit does not raise the rank of A
        A12 = assemble(CycleBasis([C1, C2], "FCB", G.m), G).A
        A123 = assemble(CycleBasis([C1, C2, C3], "FCB", G.m), G).A
        assert numerical_rank(A123) == numerical_rank(A12)

    def test_missing_rotations(self):
        scene = solvable_scene(6, 0.2, 17)
        with pytest.raises(GeometryError):
            bearing_vectors(scene.absolute_rotations[:-1], scene.graph)


def test_sequence_graph_ratios():
    rng = np.random.default_rng(18)
    scene = random_scene(8, sequence_pairs(8), rng, flip=False)
    G = scene.graph
    sol, _, _ = estimate_scales(G, "mcb")
    e12 = G.edge_id(0, 1)
    for i in range(2, 8):
        M12, M1i, M2i = G.label(0, 1), G.label(0, i), G.label(1, i)
        zf = zeller_faugeras_ratio(M12.rotation, M12.direction, M1i.direction, M2i.direction)
        assert abs(sol.scales[e12] / sol.scales[G.edge_id(0, i)] - zf) < 1e-8 * max(1.0, zf)


def test_sparse_input_types():
    scene = solvable_scene(8, 0.2, 19)
    system = assemble(minimum_cycle_basis(scene.graph), scene.graph)
    assert sp.issparse(system.A)
    assert numerical_rank(system.A) == scene.graph.m - 1
    assert check_solvability(scene.graph, system, EXACT_GAP).to_dict()["solvable"]
