"""Recover relative translation norms of an epipolar graph from cycle constraints."""

from .cycles import (
    BasisError,
    CycleBasis,
    cycle_basis,
    fundamental_cycle_basis,
    is_null_circuit,
    minimum_cycle_basis,
    null_filtered_mcb,
)
from .graph import (
    Circuit,
    EpipolarGraph,
    GraphError,
    biconnectivity_report,
    build_graph,
    spanning_tree,
)
from .io import read_graph, read_poses, write_graph
from .kernels import BACKEND
from .se3 import AbsolutePose, GeometryError, RelativeMotion, compose, invert_relative, relative_from_absolute
from .solver import (
    EXACT_GAP,
    NOISY_GAP,
    ScaleSolution,
    SolvabilityReport,
    assemble,
    check_solvability,
    estimate_scales,
    solve_scales,
)

__version__ = "0.1.0"

__all__ = [
    "AbsolutePose",
    "BACKEND",
    "BasisError",
    "Circuit",
    "CycleBasis",
    "EXACT_GAP",
    "EpipolarGraph",
    "GeometryError",
    "GraphError",
    "NOISY_GAP",
    "RelativeMotion",
    "ScaleSolution",
    "SolvabilityReport",
    "assemble",
    "biconnectivity_report",
    "build_graph",
    "check_solvability",
    "compose",
    "cycle_basis",
    "estimate_scales",
    "fundamental_cycle_basis",
    "invert_relative",
    "is_null_circuit",
    "minimum_cycle_basis",
    "null_filtered_mcb",
    "read_graph",
    "read_poses",
    "relative_from_absolute",
    "solve_scales",
    "spanning_tree",
    "write_graph",
]
