"""Circuit compatibility constraints, solvability certification and the scale solve."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .cycles import NMCB, CycleBasis, cycle_basis
from .graph import Circuit, EpipolarGraph, GraphError, biconnectivity_report
from .se3 import GeometryError

log = logging.getLogger(__name__)

EXACT_GAP = 1e-6
NOISY_GAP = 1e-2
SPARSE_MIN_COLUMNS = 200
DEGENERATE_TOL = 1e-10


def counting_condition(n: int, m: int) -> bool:
    """Necessary edge count for a unique solution: ``m >= 3n/2 - 2``."""
    return 2 * m >= 3 * n - 4


def _block_values(C: Circuit, G: EpipolarGraph):
    """Coefficients of the translation closure ``sum_k P_k d_k alpha_k = 0`` around ``C``.

    ``P_k`` is the product of the traversed rotations preceding edge ``k``; a
    reversed traversal uses the inverted label ``(R^T, -R^T d)``.
    """
    vals = np.empty((3, len(C)))
    P = np.eye(3)
    for k, (e, s) in enumerate(zip(C.edges, C.signs)):
        if not 0 <= e < G.m:
            raise GraphError(f"circuit references missing edge {e}")
        R, d = G.rotations[e], G.directions[e]
        if s < 0:
            R = R.T
            d = -(R @ d)
        vals[:, k] = P @ d
        P = P @ R
    return np.asarray(C.edges), vals


def circuit_constraint_block(C: Circuit, G: EpipolarGraph) -> sp.csr_matrix:
    """The ``3 x m`` row block of one circuit."""
    cols, vals = _block_values(C, G)
    rows = np.repeat(np.arange(3), len(cols))
    return sp.csr_matrix((vals.ravel(), (rows, np.tile(cols, 3))), shape=(3, G.m))


@dataclass
class Spectrum:
    sigma_min: float
    sigma_second: float
    sigma_max: float
    null_vector: np.ndarray
    method: str


@dataclass
class ConstraintSystem:
    """Stacked circuit constraints ``A alpha = 0``.

    Row block ``k`` (rows ``3k..3k+2``) belongs to ``circuits[k]``; column ``e``
    is edge ``e``.  ``active`` marks the columns that take part in the solve
    (every column, except edges outside a null-filtered basis).
    """

    A: sp.csr_matrix
    circuits: list[Circuit]
    graph: EpipolarGraph
    active: np.ndarray
    kind: str = ""

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @cached_property
    def active_matrix(self) -> sp.csr_matrix:
        return self.A[:, np.flatnonzero(self.active)].tocsr()

    @cached_property
    def spectrum(self) -> Spectrum:
        return _spectrum(self.active_matrix)


def assemble(basis: CycleBasis, G: EpipolarGraph) -> ConstraintSystem:
    """Stack the blocks of every basis circuit into a sparse ``3r x m`` matrix."""
    if not basis.circuits:
        raise GraphError("cannot assemble an empty basis")
    rows, cols, vals = [], [], []
    for k, C in enumerate(basis.circuits):
        c, v = _block_values(C, G)
        rows.append(np.repeat(3 * k + np.arange(3), len(c)))
        cols.append(np.tile(c, 3))
        vals.append(v.ravel())
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * len(basis.circuits), G.m),
    )
    active = basis.covered_edges() if basis.kind == NMCB else np.ones(G.m, dtype=bool)
    return ConstraintSystem(A, list(basis.circuits), G, active, basis.kind)


def _dense_spectrum(A) -> Spectrum:
    M = A.toarray() if sp.issparse(A) else np.asarray(A)
    m = M.shape[1]
    _, s, Vt = scipy.linalg.svd(M, full_matrices=True, lapack_driver="gesvd")
    s = np.concatenate([s, np.zeros(max(0, m - s.size))])
    s_max = s[0] if m else 0.0
    second = s[m - 2] if m >= 2 else 0.0
    return Spectrum(float(s[m - 1]), float(second), float(s_max), Vt[m - 1].copy(), "dense")


def _sparse_spectrum(A) -> Spectrum:
    AtA = (A.T @ A).tocsc()
    lam_max = float(eigsh(AtA, k=1, which="LA", return_eigenvectors=False)[0])
    shift = -1e-10 * lam_max
    lam, V = eigsh(AtA, k=2, sigma=shift, which="LM")
    order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    sig = np.sqrt(np.clip(lam, 0.0, None))
    return Spectrum(float(sig[0]), float(sig[1]), math.sqrt(lam_max), V[:, 0].copy(), "sparse")


def _spectrum(A) -> Spectrum:
    if A.shape[1] < SPARSE_MIN_COLUMNS or A.shape[0] < 2:
        return _dense_spectrum(A)
    try:
        return _sparse_spectrum(A)
    except (ArpackNoConvergence, RuntimeError) as exc:
        log.warning("sparse eigensolver failed (%s); falling back to dense SVD", exc)
        return _dense_spectrum(A)


def numerical_rank(A, tol: float = 1e-8) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    M = A.toarray() if sp.issparse(A) else np.asarray(A)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


@dataclass
class SolvabilityReport:
    biconnected: bool
    counting_condition: bool
    verdict: str  # "unique" | "multiple" | "inconsistent"
    gap_ratio: float  # second-smallest / largest singular value
    null_ratio: float  # smallest / largest singular value
    gap_threshold: float
    n: int
    m: int
    active_edges: int
    articulation_points: list[int] = field(default_factory=list)
    bridges: list[int] = field(default_factory=list)

    @property
    def solvable(self) -> bool:
        return self.biconnected and self.counting_condition and self.verdict == "unique"

    def to_dict(self) -> dict:
        return {
            "biconnected": self.biconnected,
            "counting_condition": self.counting_condition,
            "verdict": self.verdict,
            "gap_ratio": self.gap_ratio,
            "null_ratio": self.null_ratio,
            "gap_threshold": self.gap_threshold,
            "n": self.n,
            "m": self.m,
            "active_edges": self.active_edges,
            "articulation_points": self.articulation_points,
            "bridges": self.bridges,
            "solvable": self.solvable,
        }


def rank_verdict(spec: Spectrum, gap_threshold: float) -> str:
    if spec.sigma_max == 0 or spec.sigma_second <= gap_threshold * spec.sigma_max:
        return "multiple"
    if spec.sigma_min <= gap_threshold * spec.sigma_max:
        return "unique"
    return "inconsistent"


def check_solvability(
    G: EpipolarGraph, system: ConstraintSystem, gap_threshold: float = EXACT_GAP
) -> SolvabilityReport:
    """Necessary graph conditions plus the numerical rank test on ``A``.

    ``unique``: exactly one relatively negligible singular value; ``multiple``:
    two or more; ``inconsistent``: none (no exact null vector, e.g. noisy data
    under a tight threshold).
    """
    bic = biconnectivity_report(G)
    spec = system.spectrum
    s_max = spec.sigma_max if spec.sigma_max > 0 else 1.0
    return SolvabilityReport(
        biconnected=bic.is_biconnected,
        counting_condition=counting_condition(G.n, G.m),
        verdict=rank_verdict(spec, gap_threshold),
        gap_ratio=spec.sigma_second / s_max,
        null_ratio=spec.sigma_min / s_max,
        gap_threshold=gap_threshold,
        n=G.n,
        m=G.m,
        active_edges=int(system.active.sum()),
        articulation_points=bic.articulation_points,
        bridges=bic.bridges,
    )


@dataclass
class ScaleSolution:
    """Unit-norm scales (NaN for edges left out of the solve) and diagnostics."""

    scales: np.ndarray
    sigma_min: float
    sigma_second: float
    sigma_max: float
    residual: float
    anomalies: np.ndarray
    report: SolvabilityReport | None = None
    method: str = "dense"

    @property
    def recovered(self) -> np.ndarray:
        return ~np.isnan(self.scales)

    def to_dict(self) -> dict:
        return {
            "scales": [None if np.isnan(x) else float(x) for x in self.scales],
            "sigma_min": self.sigma_min,
            "sigma_second": self.sigma_second,
            "sigma_max": self.sigma_max,
            "residual": self.residual,
            "anomalies": np.flatnonzero(self.anomalies).tolist(),
            "eigensolver": self.method,
            "diagnostics": None if self.report is None else self.report.to_dict(),
        }


def solve_scales(
    system: ConstraintSystem,
    gap_threshold: float = EXACT_GAP,
    report: SolvabilityReport | None = None,
    certify: bool = True,
) -> ScaleSolution:
    """Least right singular vector of ``A`` over the active columns.

    The sign is fixed so that the entries sum to a positive number; remaining
    non-positive entries are flagged as anomalies rather than clamped.
    """
    if system.m < 2:
        raise GraphError("at least two unknown scales are required")
    spec = system.spectrum
    x = spec.null_vector / np.linalg.norm(spec.null_vector)
    if x.sum() < 0:
        x = -x
    scales = np.full(system.m, np.nan)
    scales[system.active] = x
    anomalies = np.zeros(system.m, dtype=bool)
    anomalies[system.active] = x <= 0
    residual = float(np.linalg.norm(system.active_matrix @ x))
    if report is None and certify:
        report = check_solvability(system.graph, system, gap_threshold)
    return ScaleSolution(
        scales, spec.sigma_min, spec.sigma_second, spec.sigma_max, residual, anomalies, report, spec.method
    )


def estimate_scales(
    G: EpipolarGraph,
    basis: str | CycleBasis = "mcb",
    epsilon_deg: float = 2.0,
    gap_threshold: float = EXACT_GAP,
    rng: np.random.Generator | None = None,
):
    """Basis construction, assembly and solve in one call.

    Returns ``(solution, basis, system)``.
    """
    if not isinstance(basis, CycleBasis):
        kw = {"rng": rng} if basis.lower() == "fcb" and rng is not None else {}
        basis = cycle_basis(G, basis, epsilon_deg, **kw)
    system = assemble(basis, G)
    return solve_scales(system, gap_threshold), basis, system


def zeller_faugeras_ratio(R12, t12, t1i, t2i) -> float:
    """Closed-form ratio ``alpha_12 / alpha_1i`` of a triangle ``(1, 2, i)``."""
    u = np.asarray(R12, dtype=float) @ np.asarray(t2i, dtype=float)
    a = np.cross(u, np.asarray(t1i, dtype=float))
    b = np.cross(u, np.asarray(t12, dtype=float))
    den = float(b @ b)
    if math.sqrt(den) < DEGENERATE_TOL:
        raise GeometryError("degenerate (collinear) configuration")
    return float(a @ b) / den


def bearing_vectors(absolute_rotations, G: EpipolarGraph) -> np.ndarray:
    """``3 x m`` matrix of baseline versors ``-R_i^T d_ij`` for the stored orientations."""
    Rabs = np.asarray(absolute_rotations, dtype=float)
    if Rabs.shape != (G.n, 3, 3):
        raise GeometryError(f"need {G.n} absolute rotations, got shape {Rabs.shape}")
    src = G.edge_array[:, 0]
    return -np.einsum("eji,ej->ie", Rabs[src], G.directions)


def bearing_constraint_matrix(absolute_rotations, G: EpipolarGraph, basis: CycleBasis) -> sp.csr_matrix:
    """Bearing form ``(C kr B)``: column-wise Kronecker of signed indicators and bearings."""
    B = bearing_vectors(absolute_rotations, G)
    C = sp.csr_matrix(basis.indicator_matrix(signed=True))
    rows, cols, vals = [], [], []
    coo = C.tocoo()
    for k, e, s in zip(coo.row, coo.col, coo.data):
        rows.extend(3 * k + np.arange(3))
        cols.extend([e] * 3)
        vals.extend(s * B[:, e])
    return sp.csr_matrix((vals, (rows, cols)), shape=(3 * C.shape[0], G.m))
