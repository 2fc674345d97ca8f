#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot kernels (max-tree union-find, alpha-tree union-find,
component labeling) plus full tree builds, on random u8 images, and prints
per-size speedups.

Usage: python benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeats 3]
"""

import argparse
import time

import numpy as np

from attriprof._kernels import get_backend
from attriprof import build_max_tree, build_tree_of_shapes


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(backend, img, repeats):
    H, W = img.shape
    flat = img.ravel().astype(np.int64)
    order = np.argsort(flat, kind="stable")
    mask = img >= int(img.mean())
    results = {
        "max_tree_parent": _time(lambda: backend.max_tree_parent(flat, order, H, W, 4), repeats),
        "alpha_tree_build": _time(lambda: backend.alpha_tree_build(img), repeats),
        "label_components": _time(lambda: backend.label_components(mask, 4), repeats),
    }
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--levels", type=int, default=256)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    fallback = get_backend("fallback")
    try:
        native = get_backend("native")
    except ImportError:
        print("native backend not built; compile with `pip install -e .`")
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'size':>6}{'native':>12}{'fallback':>12}{'speedup':>9}")
    for size in sizes:
        img = rng.integers(0, args.levels, (size, size)).astype(np.int64)
        nat = bench_backend(native, img, args.repeats)
        fb = bench_backend(fallback, img, args.repeats)
        for kernel in nat:
            sp = fb[kernel] / nat[kernel]
            print(f"{kernel:<22}{size:>6}{nat[kernel] * 1e3:>10.1f}ms"
                  f"{fb[kernel] * 1e3:>10.1f}ms{sp:>8.1f}x")

    # whole-tree builds under each lane (tree of shapes kept small: its
    # levelwise sweep is the heaviest part of the pipeline)
    import attriprof.hierarchy as H

    print()
    print(f"{'tree build':<22}{'size':>6}{'native':>12}{'fallback':>12}{'speedup':>9}")
    for size, builder, name in ((256, build_max_tree, "max_tree"),
                                (64, build_tree_of_shapes, "tree_of_shapes")):
        img = rng.integers(0, args.levels, (size, size)).astype(np.int64)
        H.backend = native
        t_nat = _time(lambda: builder(img), args.repeats)
        H.backend = fallback
        t_fb = _time(lambda: builder(img), args.repeats)
        H.backend = native
        print(f"{name:<22}{size:>6}{t_nat * 1e3:>10.1f}ms{t_fb * 1e3:>10.1f}ms"
              f"{t_fb / t_nat:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
