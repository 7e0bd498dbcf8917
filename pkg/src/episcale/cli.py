"""Command-line front end.

Exit codes: 0 success (``solve``: unique solution; ``check``: all checks pass),
1 I/O or validation error, 2 ``solve`` found multiple solutions or ``check``
failed a necessary condition.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .cycles import BasisError, cycle_basis
from .graph import GraphError, biconnectivity_report, connected_components, cycle_space_dimension
from .io import (
    GraphFileError,
    align_poses,
    graph_to_dict,
    read_graph,
    read_poses,
    scales_from_poses,
    write_graph,
)
from .se3 import GeometryError
from .solver import EXACT_GAP, assemble, check_solvability, counting_condition, numerical_rank, solve_scales
from .synth import (
    ExperimentConfig,
    NoiseModel,
    SceneError,
    corrupt,
    generate_scene,
    relative_mean_error,
    run_experiment,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
DEFAULT_SEED = 0
BASIS_CHOICES = ("fcb", "mcb", "nmcb")


def _emit(doc, path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _load(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        doc = read_graph(args.input)
    for w in caught:
        _warn(str(w.message))
    return doc


def _true_scales(args, doc):
    if getattr(args, "poses", None):
        ids, poses = read_poses(args.poses)
        return scales_from_poses(align_poses(doc, ids, poses), doc.graph)
    return doc.true_scales()


def _make_basis(G, args):
    rng = np.random.default_rng(args.seed) if args.basis == "fcb" and args.seed is not None else None
    kw = {"rng": rng} if rng is not None else {}
    return cycle_basis(G, args.basis, args.epsilon, **kw)


def cmd_solve(args) -> int:
    doc = _load(args)
    G = doc.graph
    edge_map = np.arange(G.m)
    if args.largest_component:
        bic = biconnectivity_report(G)
        if bic.largest is None:
            raise GraphError("graph has no biconnected component with a circuit")
        G, edge_map = bic.largest, bic.largest_edges
    basis = _make_basis(G, args)
    system = assemble(basis, G)
    sol = solve_scales(system, args.gap_threshold)
    scales = np.full(doc.graph.m, np.nan)
    scales[edge_map] = sol.scales
    out = {
        "edges": [list(e) for e in doc.graph.edges],
        "scales": [None if np.isnan(x) else float(x) for x in scales],
        "diagnostics": sol.report.to_dict(),
        "residual": sol.residual,
        "singular_values": {"min": sol.sigma_min, "second": sol.sigma_second, "max": sol.sigma_max},
        "eigensolver": sol.method,
        "anomalies": [int(edge_map[e]) for e in np.flatnonzero(sol.anomalies)],
        "basis_stats": basis.summary(),
    }
    truth = _true_scales(args, doc)
    if truth is not None:
        ok = ~np.isnan(scales)
        out["relative_mean_error"] = relative_mean_error(truth[ok], scales[ok])
    _emit(out, args.output)
    verdict = sol.report.verdict
    if verdict == "multiple":
        _warn("the system has multiple solutions; scales are not determined up to a single factor")
        return EXIT_FAIL
    if verdict == "inconsistent":
        _warn("no singular value below the gap threshold (noisy data?); returning the least-squares solution")
    return EXIT_OK


def cmd_check(args) -> int:
    doc = _load(args)
    G = doc.graph
    name = doc.vertex_name
    bic = biconnectivity_report(G)
    comps = connected_components(G)
    checks = {
        "connected": len(comps) == 1,
        "biconnected": bic.is_biconnected,
        "counting_condition": counting_condition(G.n, G.m),
    }
    report = {
        "n": G.n,
        "m": G.m,
        "connected_components": len(comps),
        "articulation_points": [name(v) for v in bic.articulation_points],
        "bridges": [[name(G.edges[e][0]), name(G.edges[e][1])] for e in bic.bridges],
        "biconnected_components": len(bic.components),
        "cycle_space_dimension": cycle_space_dimension(G),
        "required_edges": int(np.ceil(1.5 * G.n)) - 2,
    }
    if args.rank:
        if checks["connected"] and G.m >= 2:
            system = assemble(_make_basis(G, args), G)
            sol = check_solvability(G, system, args.gap_threshold)
            report["rank"] = {
                "numerical_rank": numerical_rank(system.active_matrix, args.gap_threshold),
                "columns": int(system.active.sum()),
                "verdict": sol.verdict,
                "gap_ratio": sol.gap_ratio,
                "null_ratio": sol.null_ratio,
            }
            checks["rank"] = sol.verdict != "multiple"
        else:
            checks["rank"] = False
    report["checks"] = checks
    report["passed"] = all(checks.values())
    if args.json:
        _emit(report, args.output)
    else:
        _print_check(report, args.output)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _print_check(r: dict, path) -> None:
    mark = {True: "ok", False: "FAIL"}
    c = r["checks"]
    lines = [
        f"vertices {r['n']}, edges {r['m']}, cycle space dimension {r['cycle_space_dimension']}",
        f"[{mark[c['connected']]}] connected ({r['connected_components']} component(s))",
        f"[{mark[c['biconnected']]}] biconnected ({r['biconnected_components']} biconnected component(s))",
    ]
    if r["articulation_points"]:
        lines.append("      articulation points: " + ", ".join(str(v) for v in r["articulation_points"]))
    if r["bridges"]:
        lines.append("      bridges: " + ", ".join(f"({a}, {b})" for a, b in r["bridges"]))
    lines.append(f"[{mark[c['counting_condition']]}] counting condition m >= {r['required_edges']}")
    if "rank" in c:
        rk = r.get("rank")
        if rk is None:
            lines.append(f"[{mark[c['rank']]}] rank certificate not computable")
        else:
            lines.append(
                f"[{mark[c['rank']]}] numerical rank {rk['numerical_rank']} of {rk['columns']} columns, "
                f"verdict {rk['verdict']} (gap ratio {rk['gap_ratio']:.3g})"
            )
    lines.append("PASS" if r["passed"] else "FAIL")
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_basis(args) -> int:
    doc = _load(args)
    basis = _make_basis(doc.graph, args)
    out = basis.summary()
    out["circuits"] = [[doc.vertex_name(v) for v in c.vertices] for c in basis.circuits]
    if basis.tree is not None:
        out["tree"] = [list(doc.graph.edges[e]) for e in basis.tree]
    _emit(out, args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    scene = generate_scene(args.n, args.missing, rng)
    observed, outliers = corrupt(scene, NoiseModel(args.sigma, args.outliers), rng)
    if args.output in (None, "-"):
        _emit(graph_to_dict(observed, scales=scene.scales, poses=scene.poses, outliers=outliers), None)
    else:
        write_graph(args.output, observed, scales=scene.scales, poses=scene.poses, outliers=outliers)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = ExperimentConfig(
        n=args.n,
        trials=args.trials,
        trees=args.trees,
        epsilon_deg=args.epsilon,
        seed=args.seed,
        workers=args.workers,
    )
    if args.missing:
        cfg.missing = tuple(args.missing)
    if args.sigmas:
        cfg.sigmas = tuple(args.sigmas)
    if args.fractions:
        cfg.outlier_fractions = tuple(args.fractions)
    if args.methods:
        cfg.methods = tuple(m.upper().replace("NMCB", "N-MCB") for m in args.methods)
    report = run_experiment(args.protocol, cfg)
    paths = report.write(args.output)
    failed = sum(r["status"] != "ok" for r in report.rows)
    if failed:
        _warn(f"{failed} trial(s) failed; see {paths['csv']}")
    print(json.dumps(paths))
    return EXIT_OK


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="episcale", description="Epipolar scale recovery from cycle bases.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def graph_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--input", "-i", required=True, help="graph file (JSON)")
        s.add_argument("--output", "-o", help="output file (default: stdout)")
        s.add_argument("--basis", choices=BASIS_CHOICES, default="mcb", help="cycle basis (default: mcb)")
        s.add_argument("--epsilon", type=float, default=2.0, help="null-circuit threshold in degrees (default: 2)")
        s.add_argument("--gap-threshold", type=float, default=EXACT_GAP,
                       help=f"relative singular-value threshold (default: {EXACT_GAP:g})")
        s.add_argument("--seed", type=int, default=None,
                       help="randomize the FCB spanning tree with this seed (default: deterministic BFS tree)")
        return s

    s = graph_cmd("solve", "estimate the epipolar scales")
    s.add_argument("--largest-component", action="store_true", help="solve on the largest biconnected component")
    s.add_argument("--poses", help="ground-truth pose file; reports the relative mean error")
    s.set_defaults(func=cmd_solve)

    s = graph_cmd("check", "necessary solvability conditions")
    s.add_argument("--rank", action="store_true", help="also compute the numerical-rank certificate")
    s.add_argument("--json", action="store_true", help="machine-readable report")
    s.set_defaults(func=cmd_check)

    s = graph_cmd("basis", "print a cycle basis")
    s.set_defaults(func=cmd_basis)

    s = sub.add_parser("synth", help="write a random synthetic graph file")
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--missing", type=float, default=0.5, help="fraction of missing pairs")
    s.add_argument("--sigma", type=float, default=0.0, help="noise in degrees")
    s.add_argument("--outliers", type=float, default=0.0, help="fraction of outlier edges")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default: {DEFAULT_SEED}")
    s.add_argument("--output", "-o", help="output file (default: stdout)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("bench", help="run a synthetic noise or outlier sweep")
    s.add_argument("protocol", choices=("noise", "outlier"))
    s.add_argument("--output", "-o", default="bench_out", help="output directory (default: bench_out)")
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--missing", type=_floats, help="comma-separated missing fractions")
    s.add_argument("--sigmas", type=_floats, help="comma-separated noise levels in degrees")
    s.add_argument("--fractions", type=_floats, help="comma-separated outlier fractions")
    s.add_argument("--methods", nargs="+", choices=("fcb", "mcb", "nmcb"))
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--trees", type=int, default=10, help="random spanning trees per FCB trial")
    s.add_argument("--epsilon", type=float, default=None,
                   help="null-circuit threshold in degrees (default: max(2, 1.5 sigma))")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default: {DEFAULT_SEED}")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphFileError, GraphError, GeometryError, BasisError, SceneError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
