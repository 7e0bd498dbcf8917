"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 50 100 200] [--repeat 3]

Workloads are the two hot loops of the minimum cycle basis: BFS trees from
every root, and greedy GF(2) independence over the sorted Horton candidates.
"""

import argparse
import time

import numpy as np

from episcale import _pykernels
from episcale.cycles import horton_candidates
from episcale.synth import generate_scene

try:
    from episcale import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(n, missing, seed):
    scene = generate_scene(n, missing, np.random.default_rng(seed))
    G = scene.graph
    indptr, indices, _ = G.csr
    cands = horton_candidates(G, weighted=False)
    lens = np.cumsum([0] + [len(c.edges) for c, _ in cands]).astype(np.int64)
    ids = np.concatenate([np.asarray(c.edges, dtype=np.int64) for c, _ in cands])
    target = G.m - G.n + 1
    return G, indptr, indices, lens, ids, target, len(cands)


def run(mod, G, indptr, indices, lens, ids, target, repeat):
    t_bfs = best_of(lambda: mod.bfs_all(indptr, indices, G.n), repeat)
    t_gf2 = best_of(lambda: mod.Gf2Eliminator(G.m).insert_many(lens, ids, target), repeat)
    return t_bfs, t_gf2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--missing", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the Python fallback is timed")
    print(f"{'n':>5} {'m':>6} {'cands':>7} {'kernel':>6} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for n in args.n:
        G, indptr, indices, lens, ids, target, nc = workloads(n, args.missing, args.seed)
        py = run(_pykernels, G, indptr, indices, lens, ids, target, args.repeat)
        cy = run(_ckernels, G, indptr, indices, lens, ids, target, args.repeat) if _ckernels else (np.nan,) * 2
        for name, a, b in zip(("bfs", "gf2"), py, cy):
            print(f"{n:>5} {G.m:>6} {nc:>7} {name:>6} {a:>10.4f} {b:>10.4f} {a / b:>8.1f}")


if __name__ == "__main__":
    main()
