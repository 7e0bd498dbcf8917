"""Graph files (JSON) and pose lists (plain text).

A graph file looks like::

    {"n": 3,
     "edges": [{"i": 0, "j": 1, "R": [9 floats, row-major], "t": [3 floats]}, ...],
     "labels": ["a", "b", "c"],                      # optional vertex names
     "ground_truth": {"scales": [...], "poses": [{"R": [...], "c": [...]}],
                      "outliers": [...]}}             # optional

``R`` and ``t`` are the relative rotation and unit translation direction of
the stored orientation ``(i, j)``.  Floats are written with ``repr`` so a
write/read cycle is bit-exact.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import EpipolarGraph, GraphError
from .se3 import ORTH_TOL, AbsolutePose, GeometryError, RelativeMotion, project_to_so3

DIRECTION_WARN_TOL = 1e-6
ROTATION_WARN_TOL = 1e-6
ROTATION_REJECT_TOL = 1e-2


class GraphFileError(ValueError):
    """Malformed or inconsistent graph/pose file."""


@dataclass
class GraphDocument:
    graph: EpipolarGraph
    vertex_labels: list | None = None
    scales: np.ndarray | None = None
    poses: list[AbsolutePose] | None = None
    outliers: list[int] | None = None

    def vertex_name(self, v: int):
        return v if self.vertex_labels is None else self.vertex_labels[v]

    def true_scales(self) -> np.ndarray | None:
        """Ground-truth scales, stored or derived from the poses."""
        if self.scales is not None:
            return self.scales
        if self.poses is not None:
            return scales_from_poses(self.poses, self.graph)
        return None


def scales_from_poses(poses, G: EpipolarGraph) -> np.ndarray:
    out = np.empty(G.m)
    for e, (i, j) in enumerate(G.edges):
        R = poses[i].rotation @ poses[j].rotation.T
        out[e] = np.linalg.norm(poses[i].translation - R @ poses[j].translation)
    return out


def _floats(value, size: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise GraphFileError(f"{what}: expected {size} numbers") from exc
    if arr.shape != (size,) or not np.all(np.isfinite(arr)):
        raise GraphFileError(f"{what}: expected {size} finite numbers")
    return arr


def _rotation(value, what: str) -> np.ndarray:
    R = _floats(value, 9, what).reshape(3, 3)
    err = max(np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1.0))
    if err <= ORTH_TOL:
        return R
    if err > ROTATION_REJECT_TOL or np.linalg.det(R) <= 0:
        raise GraphFileError(f"{what}: not a rotation matrix")
    if err > ROTATION_WARN_TOL:
        warnings.warn(f"{what}: rotation off by {err:.2e}, projected onto SO(3)", stacklevel=3)
    return project_to_so3(R)


def _direction(value, what: str) -> np.ndarray:
    t = _floats(value, 3, what)
    norm = float(np.linalg.norm(t))
    if norm == 0:
        raise GraphFileError(f"{what}: zero translation direction")
    if abs(norm - 1.0) > DIRECTION_WARN_TOL:
        warnings.warn(f"{what}: direction norm {norm:.6g}, normalized", stacklevel=3)
    return t if abs(norm - 1.0) <= 1e-12 else t / norm


def graph_from_dict(doc: dict) -> GraphDocument:
    if not isinstance(doc, dict):
        raise GraphFileError("graph file must hold a JSON object")
    try:
        n = int(doc["n"])
        raw_edges = doc["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFileError("graph file needs 'n' and 'edges'") from exc
    if n < 1 or not isinstance(raw_edges, list):
        raise GraphFileError("'n' must be positive and 'edges' a list")
    edges, labels = [], []
    for k, item in enumerate(raw_edges):
        what = f"edge {k}"
        try:
            i, j = int(item["i"]), int(item["j"])
            R, t = item["R"], item["t"]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFileError(f"{what}: needs integer 'i', 'j' and arrays 'R', 't'") from exc
        edges.append((i, j))
        labels.append(RelativeMotion(_rotation(R, what), _direction(t, what)))
    try:
        G = EpipolarGraph(n, edges, labels)
    except GraphError as exc:
        raise GraphFileError(str(exc)) from exc

    names = doc.get("labels")
    if names is not None and (not isinstance(names, list) or len(names) != n):
        raise GraphFileError("'labels' must list one name per vertex")
    out = GraphDocument(G, names)
    gt = doc.get("ground_truth")
    if gt:
        if gt.get("scales") is not None:
            out.scales = _floats(gt["scales"], G.m, "ground_truth.scales")
        if gt.get("poses") is not None:
            if len(gt["poses"]) != n:
                raise GraphFileError("ground_truth.poses needs one pose per vertex")
            try:
                out.poses = [
                    AbsolutePose.from_center(_rotation(p["R"], f"pose {v}"), _floats(p["c"], 3, f"pose {v}"))
                    for v, p in enumerate(gt["poses"])
                ]
            except (KeyError, TypeError, GeometryError) as exc:
                raise GraphFileError(f"ground_truth.poses: {exc}") from exc
        if gt.get("outliers") is not None:
            out.outliers = sorted(int(e) for e in gt["outliers"])
    return out


def graph_to_dict(
    G: EpipolarGraph,
    vertex_labels=None,
    scales=None,
    poses=None,
    outliers=None,
) -> dict:
    doc: dict = {"n": G.n, "edges": []}
    for (i, j), M in zip(G.edges, G.labels):
        doc["edges"].append(
            {"i": i, "j": j, "R": [float(x) for x in M.rotation.ravel()], "t": [float(x) for x in M.direction]}
        )
    if vertex_labels is not None:
        doc["labels"] = list(vertex_labels)
    gt = {}
    if scales is not None:
        gt["scales"] = [float(x) for x in scales]
    if poses is not None:
        gt["poses"] = [
            {"R": [float(x) for x in p.rotation.ravel()], "c": [float(x) for x in p.center]} for p in poses
        ]
    if outliers is not None:
        gt["outliers"] = [int(e) for e in outliers]
    if gt:
        doc["ground_truth"] = gt
    return doc


def read_graph(path) -> GraphDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise GraphFileError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return graph_from_dict(doc)


def write_graph(path, G: EpipolarGraph, **extra) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(G, **extra), indent=1) + "\n")


def read_poses(path) -> tuple[list[str], list[AbsolutePose]]:
    """Pose list: ``id r11 r12 ... r33 cx cy cz`` per line; ``#`` starts a comment."""
    ids, poses = [], []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise GraphFileError(f"cannot read {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 13:
            raise GraphFileError(f"{path}:{lineno}: expected 13 fields, got {len(parts)}")
        try:
            vals = [float(x) for x in parts[1:]]
        except ValueError as exc:
            raise GraphFileError(f"{path}:{lineno}: non-numeric field") from exc
        R = _rotation(vals[:9], f"{path}:{lineno}")
        ids.append(parts[0])
        poses.append(AbsolutePose.from_center(R, vals[9:]))
    if len(set(ids)) != len(ids):
        raise GraphFileError(f"{path}: duplicate pose id")
    return ids, poses


def write_poses(path, poses, ids=None) -> None:
    ids = range(len(poses)) if ids is None else ids
    with open(path, "w") as fh:
        for name, p in zip(ids, poses):
            fields = [repr(float(x)) for x in p.rotation.ravel()] + [repr(float(x)) for x in p.center]
            fh.write(f"{name} " + " ".join(fields) + "\n")


def align_poses(doc: GraphDocument, ids, poses) -> list[AbsolutePose]:
    """Order a pose list by graph vertex (matching vertex labels, else integer ids)."""
    names = doc.vertex_labels if doc.vertex_labels is not None else list(range(doc.graph.n))
    by_id = dict(zip(ids, poses))
    try:
        return [by_id[str(name)] for name in names]
    except KeyError as exc:
        raise GraphFileError(f"no pose for vertex {exc.args[0]}") from exc
