"""Benchmark the numba kernels against the pure-numpy fallback.

Builds a synthetic face-like workload (closest-point queries against a
triangle soup, planar rasterization of a parametrized grid), checks the
two backends agree bit for bit, and reports best-of-N wall times.

Usage:
    python benchmarks/bench_kernels.py [--points 20000] [--grid-n 40]
                                       [--width 256] [--repeats 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from facegeom.kernels import _numpy as knp
from facegeom.parametrize import boundary_embedding, uniform_weights, weighted_embed
from facegeom.synthetic import grid_boundary_anchor, make_grid_mesh

try:
    from facegeom.kernels import _numba as knb
except ImportError:
    knb = None


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def closest_points_workload(n_points, grid_n, seed):
    rng = np.random.default_rng(seed)
    mesh = make_grid_mesh(grid_n)
    verts = mesh.vertices + 0.05 * rng.standard_normal(mesh.vertices.shape)
    tri = mesh.triangles
    points = rng.random((n_points, 3)) * [1.0, 1.0, 0.3]
    return points, verts[tri[:, 0]], verts[tri[:, 1]], verts[tri[:, 2]]


def rasterize_workload(grid_n, width, seed):
    rng = np.random.default_rng(seed)
    mesh = make_grid_mesh(grid_n)
    loop = mesh.boundary_loop(grid_boundary_anchor(grid_n))
    uv_b, _ = boundary_embedding(mesh.vertices[loop])
    pmap = weighted_embed(mesh, uniform_weights(mesh), loop, uv_b)
    attrs = rng.random((mesh.n_vertices, 3))
    uv = pmap.uv
    tri = mesh.triangles
    return (uv[tri[:, 0]], uv[tri[:, 1]], uv[tri[:, 2]],
            attrs[tri[:, 0]], attrs[tri[:, 1]], attrs[tri[:, 2]],
            width, width)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000, help="closest-point query count")
    ap.add_argument("--grid-n", type=int, default=40, help="grid resolution (triangle count ~ 2(n-1)^2)")
    ap.add_argument("--width", type=int, default=256, help="rasterization width")
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats, best is reported")
    ap.add_argument("--seed", type=int, default=0)
    ns = ap.parse_args(argv)

    if knb is None:
        print("numba backend unavailable; timing the numpy fallback only")

    cp_args = closest_points_workload(ns.points, ns.grid_n, ns.seed)
    rz_args = rasterize_workload(ns.grid_n, ns.width, ns.seed)
    n_tri = len(cp_args[1])
    cases = [
        (f"closest_points  {ns.points} pts x {n_tri} tris", "closest_points", cp_args),
        (f"rasterize       {n_tri} tris -> {ns.width}x{ns.width}", "rasterize", rz_args),
    ]

    print(f"{'kernel':<44} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for label, name, args in cases:
        t_np, out_np = _best_of(lambda: getattr(knp, name)(*args), ns.repeats)
        if knb is None:
            print(f"{label:<44} {t_np * 1e3:>8.1f}ms {'-':>10} {'-':>8}")
            continue
        getattr(knb, name)(*args)  # JIT warmup outside the timed region
        t_nb, out_nb = _best_of(lambda: getattr(knb, name)(*args), ns.repeats)
        for a, b in zip(out_np, out_nb):
            if not np.array_equal(np.asarray(a), np.asarray(b)):
                raise AssertionError(f"{name}: backends disagree")
        print(f"{label:<44} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
