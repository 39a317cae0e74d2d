"""Numba-compiled hot kernels.

Formulas must stay in sync with ``_numpy.py`` so the two backends agree
bit-for-bit. Parallelism is per query point with disjoint output slots,
so results do not depend on thread count.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _closest_on_triangle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Closest point to (px,py,pz) on one triangle, via region tests."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        return ax + abx * t, ay + aby * t, az + abz * t
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        return ax + acx * t, ay + acy * t, az + acz * t
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + (cx - bx) * t, by + (cy - by) * t, bz + (cz - bz) * t
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@njit(cache=True, parallel=True)
def _closest_points_impl(points, tri_a, tri_b, tri_c, dist_sq, closest, tri_idx):
    n = points.shape[0]
    m = tri_a.shape[0]
    for i in prange(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        best_d = np.inf
        best_t = -1
        bqx = 0.0
        bqy = 0.0
        bqz = 0.0
        for t in range(m):
            qx, qy, qz = _closest_on_triangle(
                px, py, pz,
                tri_a[t, 0], tri_a[t, 1], tri_a[t, 2],
                tri_b[t, 0], tri_b[t, 1], tri_b[t, 2],
                tri_c[t, 0], tri_c[t, 1], tri_c[t, 2],
            )
            dx = px - qx
            dy = py - qy
            dz = pz - qz
            d = dx * dx + dy * dy + dz * dz
            if d < best_d:
                best_d = d
                best_t = t
                bqx = qx
                bqy = qy
                bqz = qz
        dist_sq[i] = best_d
        closest[i, 0] = bqx
        closest[i, 1] = bqy
        closest[i, 2] = bqz
        tri_idx[i] = best_t


def closest_points(points, tri_a, tri_b, tri_c):
    """Nearest point on a triangle soup for each query point.

    Same contract as the numpy backend: ties resolve to the lowest
    triangle index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    tri_a = np.ascontiguousarray(tri_a, dtype=np.float64)
    tri_b = np.ascontiguousarray(tri_b, dtype=np.float64)
    tri_c = np.ascontiguousarray(tri_c, dtype=np.float64)
    n = len(points)
    dist_sq = np.empty(n, dtype=np.float64)
    closest = np.empty((n, 3), dtype=np.float64)
    tri_idx = np.empty(n, dtype=np.int64)
    _closest_points_impl(points, tri_a, tri_b, tri_c, dist_sq, closest, tri_idx)
    return dist_sq, closest, tri_idx


@njit(cache=True)
def _rasterize_impl(uv0, uv1, uv2, a0, a1, a2, width, height, image, mask, owner, strict):
    n_tri = uv0.shape[0]
    n_ch = a0.shape[1]
    n_overlaps = 0
    for t in range(n_tri):
        x0 = uv0[t, 0]
        y0 = uv0[t, 1]
        x1 = uv1[t, 0]
        y1 = uv1[t, 1]
        x2 = uv2[t, 0]
        y2 = uv2[t, 1]
        denom = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if denom == 0.0:
            continue
        sign = 1.0 if denom > 0.0 else -1.0
        ad = denom * sign
        xmin = min(x0, min(x1, x2))
        xmax = max(x0, max(x1, x2))
        ymin = min(y0, min(y1, y2))
        ymax = max(y0, max(y1, y2))
        c_lo = max(0, int(np.floor(xmin * width - 0.5)))
        c_hi = min(width - 1, int(np.ceil(xmax * width - 0.5)))
        r_lo = max(0, int(np.floor(ymin * height - 0.5)))
        r_hi = min(height - 1, int(np.ceil(ymax * height - 0.5)))
        for r in range(r_lo, r_hi + 1):
            v = (r + 0.5) / height
            for c in range(c_lo, c_hi + 1):
                u = (c + 0.5) / width
                w0 = ((x1 - u) * (y2 - v) - (x2 - u) * (y1 - v)) * sign
                w1 = ((x2 - u) * (y0 - v) - (x0 - u) * (y2 - v)) * sign
                w2 = ((x0 - u) * (y1 - v) - (x1 - u) * (y0 - v)) * sign
                l0 = w0 / ad
                l1 = w1 / ad
                l2 = w2 / ad
                if l0 >= -1e-9 and l1 >= -1e-9 and l2 >= -1e-9:
                    new_strict = l0 > 1e-9 and l1 > 1e-9 and l2 > 1e-9
                    if owner[r, c] >= 0:
                        if strict[r, c] == 1 and new_strict:
                            n_overlaps += 1
                        continue
                    for k in range(n_ch):
                        image[r, c, k] = l0 * a0[t, k] + l1 * a1[t, k] + l2 * a2[t, k]
                    mask[r, c] = 1
                    owner[r, c] = t
                    strict[r, c] = 1 if new_strict else 0
    return n_overlaps


def rasterize(uv0, uv1, uv2, a0, a1, a2, width, height):
    """Rasterize planar triangles; same contract as the numpy backend."""
    uv0 = np.ascontiguousarray(uv0, dtype=np.float64)
    uv1 = np.ascontiguousarray(uv1, dtype=np.float64)
    uv2 = np.ascontiguousarray(uv2, dtype=np.float64)
    a0 = np.ascontiguousarray(a0, dtype=np.float64)
    a1 = np.ascontiguousarray(a1, dtype=np.float64)
    a2 = np.ascontiguousarray(a2, dtype=np.float64)
    n_ch = a0.shape[1]
    image = np.zeros((height, width, n_ch), dtype=np.float64)
    mask = np.zeros((height, width), dtype=np.uint8)
    owner = np.full((height, width), -1, dtype=np.int64)
    strict = np.zeros((height, width), dtype=np.uint8)
    n_overlaps = _rasterize_impl(uv0, uv1, uv2, a0, a1, a2, width, height, image, mask, owner, strict)
    return image, mask, owner, n_overlaps
