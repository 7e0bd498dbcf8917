"""Synthetic scenes, noise and outlier injection, error metrics and sweep protocols."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .cycles import CycleBasis, fundamental_cycle_basis, minimum_cycle_basis, null_filtered_mcb
from .graph import EpipolarGraph, biconnectivity_report
from .se3 import (
    AbsolutePose,
    RelativeMotion,
    perturb_direction,
    perturb_rotation,
    random_rotation,
    random_unit_vector,
    relative_from_absolute,
    rotation_from_euler,
)
from .solver import EXACT_GAP, assemble, check_solvability, counting_condition, solve_scales

log = logging.getLogger(__name__)


class SceneError(RuntimeError):
    """No solvable topology found within the attempt budget."""


@dataclass
class SyntheticScene:
    poses: list[AbsolutePose]
    graph: EpipolarGraph
    scales: np.ndarray

    @property
    def absolute_rotations(self) -> np.ndarray:
        return np.array([p.rotation for p in self.poses])


def random_poses(n: int, rng: np.random.Generator) -> list[AbsolutePose]:
    """Rotations from uniform random Euler angles, translations from a standard Gaussian."""
    return [
        AbsolutePose(rotation_from_euler(rng.uniform(-np.pi, np.pi, 3)), rng.standard_normal(3))
        for _ in range(n)
    ]


def scene_from_poses(poses, pairs, rng: np.random.Generator | None = None) -> SyntheticScene:
    """Relative motions for the given pairs; orientations are flipped at random when ``rng`` is set."""
    edges, labels, scales = [], [], []
    for i, j in pairs:
        if rng is not None and rng.random() < 0.5:
            i, j = j, i
        M, alpha = relative_from_absolute(poses[i], poses[j])
        edges.append((i, j))
        labels.append(M)
        scales.append(alpha)
    return SyntheticScene(list(poses), EpipolarGraph(len(poses), edges, labels), np.array(scales))


def is_solvable(G: EpipolarGraph, gap_threshold: float = EXACT_GAP) -> bool:
    """Biconnected, counting condition, and noise-free rank ``m - 1``."""
    if not counting_condition(G.n, G.m) or not biconnectivity_report(G).is_biconnected:
        return False
    system = assemble(fundamental_cycle_basis(G), G)
    return check_solvability(G, system, gap_threshold).verdict == "unique"


def generate_scene(
    n: int, missing_fraction: float, rng: np.random.Generator, max_attempts: int = 200
) -> SyntheticScene:
    """Random poses and a random solvable edge set.

    ``round(missing_fraction * n(n-1)/2)`` pairs are removed uniformly from the
    complete graph; topologies are re-sampled until the noise-free problem is
    certified solvable.
    """
    if n < 4:
        raise ValueError("need at least 4 cameras")
    if not 0 <= missing_fraction < 1:
        raise ValueError("missing_fraction must be in [0, 1)")
    all_pairs = list(combinations(range(n), 2))
    keep = len(all_pairs) - int(round(missing_fraction * len(all_pairs)))
    poses = random_poses(n, rng)
    for _ in range(max_attempts):
        idx = np.sort(rng.choice(len(all_pairs), size=keep, replace=False))
        scene = scene_from_poses(poses, [all_pairs[k] for k in idx], rng)
        if is_solvable(scene.graph):
            return scene
    raise SceneError(f"no solvable topology for n={n}, missing={missing_fraction} in {max_attempts} attempts")


@dataclass
class NoiseModel:
    sigma_deg: float = 0.0
    outlier_fraction: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.sigma_deg < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 <= self.outlier_fraction < 1:
            raise ValueError("outlier_fraction must be in [0, 1)")


def corrupt(scene: SyntheticScene, model: NoiseModel, rng: np.random.Generator | None = None):
    """Noisy observed graph and the sorted ids of the edges replaced by outliers."""
    if rng is None:
        rng = np.random.default_rng(model.seed)
    G = scene.graph
    labels = []
    for lab in G.labels:
        R = perturb_rotation(lab.rotation, model.sigma_deg, rng)
        d = perturb_direction(lab.direction, model.sigma_deg, rng)
        labels.append(RelativeMotion.unchecked(R, d) if model.sigma_deg == 0 else RelativeMotion(R, d))
    n_out = int(np.floor(model.outlier_fraction * G.m))
    outliers = np.sort(rng.choice(G.m, size=n_out, replace=False)) if n_out else np.zeros(0, dtype=np.int64)
    for e in outliers:
        labels[e] = RelativeMotion(random_rotation(rng), random_unit_vector(rng))
    return G.with_labels(labels), outliers


def relative_mean_error(true_scales, estimated) -> float:
    """Mean absolute residual after least-squares global scale alignment, over the mean true scale."""
    a = np.asarray(true_scales, dtype=float)
    b = np.asarray(estimated, dtype=float)
    if a.shape != b.shape:
        raise ValueError("scale vectors differ in length")
    bb = float(b @ b)
    if bb == 0:
        raise ValueError("estimated scales are all zero")
    s = float(a @ b) / bb
    return float(np.mean(np.abs(a - s * b)) / np.mean(a))


def misclassification_rate(true_outliers, basis: CycleBasis, G: EpipolarGraph) -> float:
    """Fraction of the injected outlier edges still used by some basis circuit."""
    true_outliers = np.asarray(true_outliers, dtype=np.int64)
    if true_outliers.size == 0:
        return 0.0
    covered = basis.covered_edges() if basis.m == G.m else None
    if covered is None:
        raise ValueError("basis does not belong to this graph")
    return float(covered[true_outliers].mean())


@dataclass
class ExperimentConfig:
    n: int = 50
    missing: tuple[float, ...] = (0.5, 0.75, 0.9)
    sigmas: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
    outlier_fractions: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
    outlier_sigma: float = 3.0
    trials: int = 10
    trees: int = 10
    tree_method: str = "uniform"
    epsilon_deg: float | None = None
    methods: tuple[str, ...] | None = None
    seed: int = 0
    workers: int = 1

    def method_list(self, protocol: str) -> tuple[str, ...]:
        if self.methods:
            return tuple(self.methods)
        return ("FCB", "MCB") if protocol == "noise" else ("MCB", "N-MCB")

    def epsilon_for(self, sigma: float) -> float:
        """Null-circuit threshold; defaults to ``max(2, 1.5 sigma)`` degrees."""
        return self.epsilon_deg if self.epsilon_deg is not None else max(2.0, 1.5 * sigma)


@dataclass
class BenchReport:
    protocol: str
    config: dict
    rows: list[dict] = field(default_factory=list)

    def mean_errors(self) -> dict:
        """``{(missing, x, method): mean error}`` over successful trials."""
        xkey = "sigma_deg" if self.protocol == "noise" else "outlier_fraction"
        acc: dict = {}
        for r in self.rows:
            if r["status"] != "ok":
                continue
            acc.setdefault((r["missing"], r[xkey], r["method"]), []).append(r["error"])
        return {k: float(np.mean(v)) for k, v in acc.items()}

    def mean_misclassification(self) -> dict:
        acc: dict = {}
        for r in self.rows:
            if r["status"] == "ok" and not np.isnan(r["misclassification"]):
                acc.setdefault((r["missing"], r["outlier_fraction"], r["method"]), []).append(
                    r["misclassification"]
                )
        return {k: float(np.mean(v)) for k, v in acc.items()}

    def series(self) -> dict:
        """Plot-ready ``{missing: {method: {"x": [...], "y": [...]}}}``."""
        out: dict = {}
        for (miss, x, method), y in sorted(self.mean_errors().items()):
            s = out.setdefault(str(miss), {}).setdefault(method, {"x": [], "y": []})
            s["x"].append(x)
            s["y"].append(y)
        return out

    def summary(self) -> dict:
        return {
            "protocol": self.protocol,
            "config": self.config,
            "trials": len(self.rows),
            "failed": sum(r["status"] != "ok" for r in self.rows),
            "mean_error": [
                {"missing": k[0], "x": k[1], "method": k[2], "error": v} for k, v in sorted(self.mean_errors().items())
            ],
            "mean_misclassification": [
                {"missing": k[0], "x": k[1], "method": k[2], "rate": v}
                for k, v in sorted(self.mean_misclassification().items())
            ],
        }

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "trials.csv", "summary": out / "summary.json", "series": out / "series.json"}
        with open(paths["csv"], "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(TRIAL_FIELDS))
            writer.writeheader()
            writer.writerows(self.rows)
        paths["summary"].write_text(json.dumps(self.summary(), indent=2))
        paths["series"].write_text(json.dumps(self.series(), indent=2))
        return {k: str(v) for k, v in paths.items()}


TRIAL_FIELDS = (
    "protocol",
    "n",
    "missing",
    "sigma_deg",
    "outlier_fraction",
    "method",
    "trial",
    "m",
    "circuits",
    "error",
    "misclassification",
    "recovered_fraction",
    "seconds",
    "status",
)


def _evaluate(scene, observed, outliers, method, rng, trees, epsilon, tree_method="uniform"):
    G = observed
    inlier = np.ones(G.m, dtype=bool)
    inlier[outliers] = False
    if method == "FCB":
        errs, counts = [], []
        for _ in range(trees):
            basis = fundamental_cycle_basis(G, rng=rng, tree_method=tree_method)
            sol = solve_scales(assemble(basis, G), certify=False)
            errs.append(relative_mean_error(scene.scales[inlier], sol.scales[inlier]))
            counts.append(len(basis))
        return float(np.mean(errs)), float("nan"), int(np.mean(counts)), 1.0
    if method == "MCB":
        basis = minimum_cycle_basis(G)
    elif method == "N-MCB":
        basis = null_filtered_mcb(G, epsilon)
    else:
        raise ValueError(f"unknown method {method!r}")
    sol = solve_scales(assemble(basis, G), certify=False)
    mask = inlier & sol.recovered
    err = relative_mean_error(scene.scales[mask], sol.scales[mask])
    mis = misclassification_rate(outliers, basis, G) if method == "N-MCB" else float("nan")
    return err, mis, len(basis), float(sol.recovered.mean())


def _run_trial(task):
    protocol, n, missing, sigma, frac, trial, methods, (trees, tree_method), epsilon, seed_key = task
    rng = np.random.default_rng(np.random.SeedSequence(seed_key[0], spawn_key=seed_key[1:]))
    rows = []
    base = {
        "protocol": protocol,
        "n": n,
        "missing": missing,
        "sigma_deg": sigma,
        "outlier_fraction": frac,
        "trial": trial,
    }
    try:
        scene = generate_scene(n, missing, rng)
        observed, outliers = corrupt(scene, NoiseModel(sigma, frac), rng)
    except Exception as exc:  # recorded per trial, the sweep goes on
        return [dict(base, method=mt, m=0, circuits=0, error=float("nan"), misclassification=float("nan"),
                     recovered_fraction=float("nan"), seconds=0.0, status=f"error: {exc}") for mt in methods]
    for method in methods:
        t0 = time.perf_counter()
        try:
            err, mis, count, rec = _evaluate(scene, observed, outliers, method, rng, trees, epsilon, tree_method)
            status = "ok"
        except Exception as exc:
            err, mis, count, rec, status = float("nan"), float("nan"), 0, float("nan"), f"error: {exc}"
        rows.append(
            dict(base, method=method, m=scene.graph.m, circuits=count, error=err, misclassification=mis,
                 recovered_fraction=rec, seconds=time.perf_counter() - t0, status=status)
        )
    return rows


def run_experiment(protocol: str, config: ExperimentConfig | None = None) -> BenchReport:
    """Noise sweep (error vs sigma) or outlier sweep (error vs outlier fraction).

    Every (missing, x, trial) cell draws its own scene from a seed derived from
    ``config.seed`` so results do not depend on scheduling.
    """
    if protocol not in ("noise", "outlier"):
        raise ValueError("protocol must be 'noise' or 'outlier'")
    config = config or ExperimentConfig()
    methods = config.method_list(protocol)
    tasks = []
    if protocol == "noise":
        grid = [(s, 0.0) for s in config.sigmas]
    else:
        grid = [(config.outlier_sigma, f) for f in config.outlier_fractions]
    for mi, missing in enumerate(config.missing):
        for gi, (sigma, frac) in enumerate(grid):
            for t in range(config.trials):
                tasks.append(
                    (protocol, config.n, missing, sigma, frac, t, methods, (config.trees, config.tree_method),
                     config.epsilon_for(sigma), (config.seed, mi, gi, t))
                )
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_trial, tasks))
    else:
        results = [_run_trial(t) for t in tasks]
    cfg = asdict(config)
    return BenchReport(protocol, cfg, [row for rows in results for row in rows])
