"""Pure-numpy implementations of the hot kernels.

These mirror the numba versions operation-for-operation so both backends
produce identical floats; keep formula changes in sync with ``_numba.py``.
"""
from __future__ import annotations

import numpy as np

_CHUNK = 128  # points per chunk in the all-pairs closest-point sweep


def _closest_on_triangles_chunk(p, a, b, c):
    """Closest point on each triangle for each query point.

    p: (P, 3); a, b, c: (T, 3). Returns (P, T, 3) closest points.
    Branch precedence follows the vertex/edge/face region walk of the
    scalar version; all candidates are computed, selection is by the
    first matching condition.
    """
    P = p[:, None, :]  # (P, 1, 3)
    A = a[None, :, :]
    B = b[None, :, :]
    C = c[None, :, :]
    ab = B - A
    ac = C - A
    ap = P - A
    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    bp = P - B
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    cp = P - C
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom

    cond1 = (d1 <= 0.0) & (d2 <= 0.0)
    cond2 = (d3 >= 0.0) & (d4 <= d3)
    cond3 = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    cond4 = (d6 >= 0.0) & (d5 <= d6)
    cond5 = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    cond6 = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)

    out = A + ab * v[..., None] + ac * w[..., None]  # face interior
    out = np.where(cond6[..., None], B + (C - B) * w_bc[..., None], out)
    out = np.where(cond5[..., None], A + ac * w_ac[..., None], out)
    out = np.where(cond4[..., None], np.broadcast_to(C, out.shape), out)
    out = np.where(cond3[..., None], A + ab * v_ab[..., None], out)
    out = np.where(cond2[..., None], np.broadcast_to(B, out.shape), out)
    out = np.where(cond1[..., None], np.broadcast_to(A, out.shape), out)
    return out


def closest_points(points, tri_a, tri_b, tri_c):
    """Nearest point on a triangle soup for each query point.

    Returns (dist_sq (P,), closest (P, 3), tri_index (P,)); ties resolve
    to the lowest triangle index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    tri_a = np.ascontiguousarray(tri_a, dtype=np.float64)
    tri_b = np.ascontiguousarray(tri_b, dtype=np.float64)
    tri_c = np.ascontiguousarray(tri_c, dtype=np.float64)
    n = len(points)
    dist_sq = np.empty(n, dtype=np.float64)
    closest = np.empty((n, 3), dtype=np.float64)
    tri_idx = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        p = points[start : start + _CHUNK]
        q = _closest_on_triangles_chunk(p, tri_a, tri_b, tri_c)  # (p, T, 3)
        diff = p[:, None, :] - q
        d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
        best = np.argmin(d2, axis=1)
        rows = np.arange(len(p))
        dist_sq[start : start + _CHUNK] = d2[rows, best]
        closest[start : start + _CHUNK] = q[rows, best]
        tri_idx[start : start + _CHUNK] = best
    return dist_sq, closest, tri_idx


def rasterize(uv0, uv1, uv2, a0, a1, a2, width, height):
    """Rasterize planar triangles with barycentric attribute interpolation.

    Pixel (r, c) samples uv = ((c+0.5)/width, (r+0.5)/height), row 0 at
    the bottom. Returns (image (H, W, C) float64, mask (H, W) uint8,
    owner (H, W) int64, n_overlaps) where an overlap is a pixel strictly
    interior to two triangles; edge-grazing pixels go to the first
    triangle that reaches them.
    """
    uv0 = np.ascontiguousarray(uv0, dtype=np.float64)
    uv1 = np.ascontiguousarray(uv1, dtype=np.float64)
    uv2 = np.ascontiguousarray(uv2, dtype=np.float64)
    a0 = np.ascontiguousarray(a0, dtype=np.float64)
    a1 = np.ascontiguousarray(a1, dtype=np.float64)
    a2 = np.ascontiguousarray(a2, dtype=np.float64)
    n_tri = len(uv0)
    n_ch = a0.shape[1]
    image = np.zeros((height, width, n_ch), dtype=np.float64)
    mask = np.zeros((height, width), dtype=np.uint8)
    owner = np.full((height, width), -1, dtype=np.int64)
    strict = np.zeros((height, width), dtype=np.uint8)
    n_overlaps = 0

    cs = (np.arange(width) + 0.5) / width
    rs = (np.arange(height) + 0.5) / height

    for t in range(n_tri):
        x0, y0 = uv0[t]
        x1, y1 = uv1[t]
        x2, y2 = uv2[t]
        denom = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if denom == 0.0:
            continue
        sign = 1.0 if denom > 0.0 else -1.0
        ad = denom * sign
        c_lo = max(0, int(np.floor(min(x0, x1, x2) * width - 0.5)))
        c_hi = min(width - 1, int(np.ceil(max(x0, x1, x2) * width - 0.5)))
        r_lo = max(0, int(np.floor(min(y0, y1, y2) * height - 0.5)))
        r_hi = min(height - 1, int(np.ceil(max(y0, y1, y2) * height - 0.5)))
        if c_lo > c_hi or r_lo > r_hi:
            continue
        u = cs[c_lo : c_hi + 1][None, :]
        v = rs[r_lo : r_hi + 1][:, None]
        w0 = ((x1 - u) * (y2 - v) - (x2 - u) * (y1 - v)) * sign
        w1 = ((x2 - u) * (y0 - v) - (x0 - u) * (y2 - v)) * sign
        w2 = ((x0 - u) * (y1 - v) - (x1 - u) * (y0 - v)) * sign
        l0 = w0 / ad
        l1 = w1 / ad
        l2 = w2 / ad
        inside = (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9)
        if not inside.any():
            continue
        strict_in = (l0 > 1e-9) & (l1 > 1e-9) & (l2 > 1e-9)
        rr, cc = np.nonzero(inside)
        rows = rr + r_lo
        cols = cc + c_lo
        prev_owner = owner[rows, cols]
        prev_strict = strict[rows, cols]
        new_strict = strict_in[rr, cc]
        n_overlaps += int(((prev_owner >= 0) & (prev_strict == 1) & new_strict).sum())
        take = prev_owner < 0
        if take.any():
            tr = rows[take]
            tc = cols[take]
            lt0 = l0[rr[take], cc[take]][:, None]
            lt1 = l1[rr[take], cc[take]][:, None]
            lt2 = l2[rr[take], cc[take]][:, None]
            image[tr, tc, :] = lt0 * a0[t] + lt1 * a1[t] + lt2 * a2[t]
            mask[tr, tc] = 1
            owner[tr, tc] = t
            strict[tr, tc] = new_strict[take].astype(np.uint8)
    return image, mask, owner, n_overlaps
