#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-python fallback.

Usage: python3 benchmarks/bench_kernels.py [--hexes N] [--points N] [--repeat R]
"""

import argparse
import time

import numpy as np

from hexfit import fixtures
from hexfit._kernels import _py

try:
    from hexfit._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, compiled_s, python_s):
    speedup = python_s / compiled_s if compiled_s else float("inf")
    print(f"{name:<28} {compiled_s * 1e3:>10.2f} ms {python_s * 1e3:>10.2f} ms "
          f"{speedup:>7.1f}x")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--hexes", type=int, default=20_000)
    parser.add_argument("--points", type=int, default=5_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _core is None:
        raise SystemExit("compiled backend not built; run pip install -e .")

    rng = np.random.default_rng(0)
    cube = np.array([
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
    corners = cube[None] + 0.3 * rng.standard_normal((args.hexes, 8, 3))
    verts = corners.reshape(-1, 3)
    cells = np.arange(8 * args.hexes, dtype=np.int64).reshape(args.hexes, 8)

    surface = fixtures.icosphere(3)
    tris = surface.triangle_points()
    pts = 2.0 * rng.standard_normal((args.points, 3))

    print(f"{'kernel':<28} {'compiled':>13} {'python':>13} {'speedup':>8}")
    row(f"quality ({args.hexes} hexes)",
        timeit(lambda: _core.hex_quality_samples(verts, cells), args.repeat),
        timeit(lambda: _py.hex_quality_samples(verts, cells), args.repeat))
    row(f"energy+grad ({args.hexes} hexes)",
        timeit(lambda: _core.rehqj_energy_gradient(verts, cells, 0.5),
               args.repeat),
        timeit(lambda: _py.rehqj_energy_gradient(verts, cells, 0.5),
               args.repeat))
    row(f"closest pt ({args.points}x{len(tris)} tris)",
        timeit(lambda: _core.closest_on_triangles(pts, tris), args.repeat),
        timeit(lambda: _py.closest_on_triangles(pts, tris), args.repeat))


if __name__ == "__main__":
    main()
