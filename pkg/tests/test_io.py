import numpy as np
import pytest

from _util import random_scene
from episcale.io import (
    GraphFileError,
    align_poses,
    graph_from_dict,
    graph_to_dict,
    read_graph,
    read_poses,
    write_graph,
    write_poses,
)
from episcale.synth import generate_scene


def write_scene(path, scene, **extra):
    write_graph(path, scene.graph, scales=scene.scales, poses=scene.poses, **extra)
    return path


class TestGraphFile:
    def test_round_trip_bit_exact(self, tmp_path):
        scene = generate_scene(15, 0.4, np.random.default_rng(2))
        path = write_scene(tmp_path / "g.json", scene, outliers=[1, 4])
        doc = read_graph(path)
        G = doc.graph
        assert G.edges == scene.graph.edges
        assert np.array_equal(G.rotations, scene.graph.rotations)
        assert np.array_equal(G.directions, scene.graph.directions)
        assert np.array_equal(doc.scales, scene.scales)
        assert doc.outliers == [1, 4]
        for p, q in zip(doc.poses, scene.poses):
            assert np.array_equal(p.rotation, q.rotation)
            assert np.allclose(p.center, q.center, atol=1e-14)
        assert graph_to_dict(G) == graph_to_dict(scene.graph)

    def test_direction_normalized_with_warning(self):
        doc = {"n": 2, "edges": [{"i": 0, "j": 1, "R": np.eye(3).ravel().tolist(), "t": [2.0, 0.0, 0.0]}]}
        with pytest.warns(UserWarning, match="normalized"):
            G = graph_from_dict(doc).graph
        assert np.array_equal(G.directions[0], [1.0, 0.0, 0.0])

    def test_tiny_direction_error_silently_fixed(self, recwarn):
        doc = {"n": 2, "edges": [{"i": 0, "j": 1, "R": np.eye(3).ravel().tolist(), "t": [1.0 + 1e-9, 0.0, 0.0]}]}
        G = graph_from_dict(doc).graph
        assert np.isclose(np.linalg.norm(G.directions[0]), 1.0, atol=1e-15)
        assert not recwarn.list

    def test_rotation_projected(self):
        R = np.eye(3) + 1e-5 * np.arange(9).reshape(3, 3)
        doc = {"n": 2, "edges": [{"i": 0, "j": 1, "R": R.ravel().tolist(), "t": [0.0, 0.0, 1.0]}]}
        with pytest.warns(UserWarning, match="projected"):
            G = graph_from_dict(doc).graph
        assert np.allclose(G.rotations[0].T @ G.rotations[0], np.eye(3), atol=1e-12)

    @pytest.mark.parametrize(
        "doc",
        [
            [],
            {"edges": []},
            {"n": 2, "edges": [{"i": 0, "j": 1, "R": [1, 0, 0], "t": [1, 0, 0]}]},
            {"n": 2, "edges": [{"i": 0, "j": 1, "R": (2 * np.eye(3)).ravel().tolist(), "t": [1, 0, 0]}]},
            {"n": 2, "edges": [{"i": 0, "j": 1, "R": np.eye(3).ravel().tolist(), "t": [0, 0, 0]}]},
            {"n": 2, "edges": [{"i": 0, "j": 0, "R": np.eye(3).ravel().tolist(), "t": [1, 0, 0]}]},
            {"n": 2, "edges": [{"i": 0, "R": np.eye(3).ravel().tolist(), "t": [1, 0, 0]}]},
            {"n": 2, "edges": [], "labels": ["a"]},
        ],
    )
    def test_malformed(self, doc):
        with pytest.raises(GraphFileError):
            graph_from_dict(doc)

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(GraphFileError):
            read_graph(p)
        with pytest.raises(GraphFileError):
            read_graph(tmp_path / "missing.json")

    def test_pose_file_round_trip(self, tmp_path):
        scene = generate_scene(6, 0.2, np.random.default_rng(3))
        path = tmp_path / "poses.txt"
        write_poses(path, scene.poses)
        ids, poses = read_poses(path)
        assert ids == [str(k) for k in range(6)]
        for p, q in zip(poses, scene.poses):
            assert np.array_equal(p.rotation, q.rotation)
            assert np.allclose(p.center, q.center, atol=1e-14)

    def test_pose_file_errors(self, tmp_path):
        p = tmp_path / "p.txt"
        p.write_text("# header\n0 1 0 0 0 1 0 0 0 1 0 0\n")
        with pytest.raises(GraphFileError, match="13 fields"):
            read_poses(p)
        p.write_text("a 1 0 0 0 1 0 0 0 1 0 0 0\na 1 0 0 0 1 0 0 0 1 0 0 0\n")
        with pytest.raises(GraphFileError, match="duplicate"):
            read_poses(p)

    def test_align_poses_by_label(self, tmp_path):
        scene = random_scene(3, [(0, 1), (1, 2), (0, 2)], np.random.default_rng(4))
        doc = graph_from_dict(graph_to_dict(scene.graph, vertex_labels=["x", "y", "z"]))
        path = tmp_path / "p.txt"
        write_poses(path, scene.poses[::-1], ids=["z", "y", "x"])
        aligned = align_poses(doc, *read_poses(path))
        assert all(np.array_equal(a.rotation, b.rotation) for a, b in zip(aligned, scene.poses))
