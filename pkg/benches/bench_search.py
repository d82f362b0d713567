#!/usr/bin/env python3
"""Search kernel benchmark: compiled core vs pure-numpy fallback.

Builds a realistic ~100k-row database from long procedural locomotion, then
times single-query exact search four ways: {accelerated kd-tree, brute
force} x {native, fallback}. Run:

    python3 benches/bench_search.py [--rows 100000] [--queries 200]
"""

import argparse
import time

import numpy as np

from motionweaver import synthetic
from motionweaver.features import DIM
from motionweaver.kdtree import build_kdtree
from motionweaver.kernels import get_backend
from motionweaver.matcher import LOCOMOTION_WINDOW, build_database


def time_queries(fn, queries):
    t0 = time.perf_counter()
    for q in queries:
        fn(q)
    return (time.perf_counter() - t0) / len(queries) * 1e3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--queries", type=int, default=200)
    args = ap.parse_args()

    n_frames = args.rows // 4 + 40
    clips = [
        synthetic.wander_clip("wander_a", n_frames, seed=1),
        synthetic.wander_clip("wander_b", n_frames, seed=2),
    ]
    print(f"building database (~{args.rows} rows)...")
    db = build_database(synthetic.skeleton(), clips, [])
    rows = db.window_rows(LOCOMOTION_WINDOW)
    Xw = np.ascontiguousarray(db.features_std[rows])
    tree = build_kdtree(Xw, db.config.leaf_size)
    w = db.stats.dim_weights()

    rng = np.random.default_rng(0)
    picks = rng.choice(rows.size, args.queries, replace=False)
    queries = [
        np.ascontiguousarray(Xw[i] + rng.normal(0, 0.02, DIM)) for i in picks
    ]

    backends = {}
    for name in ("native", "fallback"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"{name}: unavailable")

    print(f"\n{rows.size} searchable rows, {args.queries} queries, ms/query:")
    print(f"{'backend':>10} {'kd-tree':>10} {'brute':>10}")
    results = {}
    for name, impl in backends.items():
        kd_ms = time_queries(
            lambda q: impl.kd_query(
                tree.points, tree.perm, tree.left, tree.right,
                tree.start, tree.end, tree.lo, tree.hi, w, q,
            ),
            queries,
        )
        brute_ms = time_queries(lambda q: impl.brute_query(Xw, w, q), queries)
        results[name] = (kd_ms, brute_ms)
        print(f"{name:>10} {kd_ms:>10.3f} {brute_ms:>10.3f}")

    if len(backends) == 2:
        native = backends["native"]
        fallback = backends["fallback"]
        for q in queries[:50]:
            a = native.kd_query(
                tree.points, tree.perm, tree.left, tree.right,
                tree.start, tree.end, tree.lo, tree.hi, w, q,
            )
            b = fallback.kd_query(
                tree.points, tree.perm, tree.left, tree.right,
                tree.start, tree.end, tree.lo, tree.hi, w, q,
            )
            assert a == b, "backends disagree"
        print("\nbackends agree bit-exactly on 50 spot-checked queries")
        kd_n, br_n = results["native"]
        kd_f, br_f = results["fallback"]
        print(f"native speedup: kd {kd_f / kd_n:.1f}x, brute {br_f / br_n:.1f}x")


if __name__ == "__main__":
    main()
