"""Deterministic synthetic data for tests, benchmarks, and demos.

Everything here is small enough to run on a laptop: grid meshes around
40x40 vertices, populations of a few hundred coupled geometry/texture
samples driven by a shared low-dimensional latent, and random
disk-topology meshes for parametrization stress tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .mesh import Mesh


def _grid_xy(n: int):
    lin = np.linspace(0.0, 1.0, n)
    gx, gy = np.meshgrid(lin, lin, indexing="xy")
    return gx.ravel(), gy.ravel()


def make_grid_mesh(n: int, heights=None) -> Mesh:
    """Regular n-by-n vertex grid over [0,1]^2, each cell split into two triangles.

    Vertex (r, c) sits at index r * n + c with x = c/(n-1), y = r/(n-1).
    ``heights`` is an optional length n*n z array (default all zero).
    Triangles are counter-clockwise seen from +z.
    """
    if n < 2:
        raise ValueError("grid needs n >= 2")
    x, y = _grid_xy(n)
    z = np.zeros(n * n) if heights is None else np.asarray(heights, dtype=np.float64).ravel()
    if z.shape != (n * n,):
        raise ValueError(f"heights must have {n * n} entries")
    vertices = np.column_stack([x, y, z])
    tris = []
    for r in range(n - 1):
        for c in range(n - 1):
            a = r * n + c
            b = a + 1
            d = a + n
            e = d + 1
            tris.append((a, b, e))
            tris.append((a, e, d))
    return Mesh(vertices, np.array(tris, dtype=np.int64))


def make_symmetric_grid_mesh(n: int, heights=None) -> Mesh:
    """Grid mesh whose triangulation mirrors about the x = 0.5 midline.

    Cells left of the midline split along the a-e diagonal, cells right of
    it along b-d, so the vertex mirror map sends edges to edges. Requires
    odd n (an even cell count per row, no cell straddling the midline).
    """
    if n < 3 or n % 2 == 0:
        raise ValueError("symmetric grid needs odd n >= 3")
    x, y = _grid_xy(n)
    z = np.zeros(n * n) if heights is None else np.asarray(heights, dtype=np.float64).ravel()
    if z.shape != (n * n,):
        raise ValueError(f"heights must have {n * n} entries")
    half = (n - 1) // 2
    tris = []
    for r in range(n - 1):
        for c in range(n - 1):
            a = r * n + c
            b = a + 1
            d = a + n
            e = d + 1
            if c < half:
                tris.append((a, b, e))
                tris.append((a, e, d))
            else:
                tris.append((a, b, d))
                tris.append((b, e, d))
    return Mesh(np.column_stack([x, y, z]), np.array(tris, dtype=np.int64))


def grid_boundary_anchor(n: int) -> int:
    """Bottom-edge vertex closest to x = 0.5, the canonical loop start."""
    return (n - 1) // 2


def grid_mirror_pairs(n: int):
    """Left/right vertex pairs of a grid about the x = 0.5 midline."""
    pairs = []
    for r in range(n):
        for c in range((n + 1) // 2):
            pairs.append((r * n + c, r * n + (n - 1 - c)))
    return pairs


def make_disk_mesh(n_interior: int, seed: int, n_boundary: int | None = None) -> Mesh:
    """Random Delaunay-triangulated disk with a smooth random height field.

    Boundary vertices sit on the unit circle, interior points are drawn
    uniformly inside radius 0.92 so the convex hull is exactly the circle
    samples. Heights come from a few Gaussian bumps, keeping the surface
    smooth and the mesh disk-topology with one boundary loop.
    """
    if n_boundary is None:
        n_boundary = max(16, int(2.0 * np.sqrt(max(n_interior, 1))))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x715C]))
    for _ in range(8):
        ang = 2.0 * np.pi * np.arange(n_boundary) / n_boundary
        boundary = np.column_stack([np.cos(ang), np.sin(ang)])
        rad = 0.92 * np.sqrt(rng.uniform(0.0, 1.0, n_interior))
        theta = rng.uniform(0.0, 2.0 * np.pi, n_interior)
        interior = np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
        pts = np.vstack([boundary, interior])
        dela = Delaunay(pts)
        if len(dela.coplanar) == 0:
            break
    else:
        raise RuntimeError("could not build a full Delaunay triangulation")

    tris = dela.simplices.astype(np.int64)
    p0, p1, p2 = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    area2 = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    flip = area2 < 0
    tris[flip] = tris[flip][:, ::-1]

    centers = rng.uniform(-0.6, 0.6, (4, 2))
    amps = rng.uniform(-0.25, 0.25, 4)
    widths = rng.uniform(0.25, 0.6, 4)
    z = np.zeros(len(pts))
    for ctr, amp, wid in zip(centers, amps, widths):
        z += amp * np.exp(-np.sum((pts - ctr) ** 2, axis=1) / (2.0 * wid**2))
    return Mesh(np.column_stack([pts, z]), tris)


def oracle_map_solution(mesh: Mesh, weights, loop, loop_uv) -> np.ndarray:
    """Dense reference solve of the barycentric parametrization system.

    Solves the row-normalized equations u_i = sum_j lambda_ij u_j directly
    with a dense factorization. Independent arithmetic from the sparse
    production path, so agreement is a real cross-check.
    """
    n = mesh.n_vertices
    W = np.zeros((n, n), dtype=np.float64)
    e, w = weights.edges, weights.values
    W[e[:, 0], e[:, 1]] = w
    W[e[:, 1], e[:, 0]] = w
    lam = W / W.sum(axis=1, keepdims=True)
    is_boundary = np.zeros(n, dtype=bool)
    is_boundary[loop] = True
    interior = np.nonzero(~is_boundary)[0]
    uv = np.zeros((n, 2), dtype=np.float64)
    uv[loop] = loop_uv
    if len(interior):
        A = np.eye(len(interior)) - lam[np.ix_(interior, interior)]
        b = lam[np.ix_(interior, loop)] @ np.asarray(loop_uv, dtype=np.float64)
        uv[interior] = np.linalg.solve(A, b)
    return uv


_FREQ_PAIRS = sorted(
    ((a, b) for a in range(1, 8) for b in range(1, 8)),
    key=lambda ab: (ab[0] ** 2 + ab[1] ** 2, ab),
)


@dataclass(frozen=True)
class SyntheticFaceSpec:
    """Knobs for the coupled geometry/texture population generator.

    ``texture_noise`` scales additive texture noise. With
    ``texture_noise_modes == 0`` the noise is white per entry; with q > 0
    it is drawn from q smooth random fields at frequencies disjoint from
    the coupling fields, giving spatially correlated corruption like the
    shading and registration artifacts of captured textures.
    """

    grid_n: int = 40
    n_modes: int = 20
    n_samples: int = 200
    geo_scale: float = 0.08
    texture_scale: float = 0.05
    texture_noise: float = 0.0
    texture_noise_modes: int = 0
    n_expr_modes: int = 4
    expr_scale: float = 0.04


@dataclass(frozen=True)
class SyntheticPopulation:
    """A generated population plus everything needed to check estimators.

    geometries/textures are (3m, n) with one sample per column, vertex
    coordinates interleaved x0 y0 z0 x1 y1 z1 ... Textures are RGB in the
    same layout. ``latents`` holds the (n_modes, n) ground-truth latent
    that drives both, ``expression_offsets`` per-sample additive geometry
    displacement fields.
    """

    template: Mesh
    geometries: np.ndarray
    textures: np.ndarray
    latents: np.ndarray
    expression_offsets: np.ndarray
    landmark_indices: np.ndarray
    spec: SyntheticFaceSpec

    @property
    def n_samples(self) -> int:
        return self.geometries.shape[1]

    def sample_mesh(self, i: int, with_expression: bool = False) -> Mesh:
        g = self.geometries[:, i]
        if with_expression:
            g = g + self.expression_offsets[:, i]
        v = g.reshape(-1, 3)
        colors = np.clip(self.textures[:, i].reshape(-1, 3), 0.0, 1.0)
        return Mesh(v, self.template.triangles, colors=colors, landmarks=self.landmark_indices)


def _mode_fields(n: int, count: int):
    """Smooth displacement fields vanishing on the grid boundary."""
    x, y = _grid_xy(n)
    fields = np.empty((n * n, count), dtype=np.float64)
    for k in range(count):
        a, b = _FREQ_PAIRS[k]
        fields[:, k] = np.sin(np.pi * a * x) * np.sin(np.pi * b * y)
    return fields


def _texture_fields(n: int, count: int, offset: int = 0):
    """Smooth RGB fields, one flattened (3m,) column per mode.

    ``offset`` skips the first frequency pairs so callers can build a
    second bank of fields disjoint from the coupling fields.
    """
    x, y = _grid_xy(n)
    m = n * n
    fields = np.empty((3 * m, count), dtype=np.float64)
    for k in range(count):
        a, b = _FREQ_PAIRS[offset + k]
        base = np.cos(np.pi * a * x) * np.cos(np.pi * b * y)
        rgb = np.column_stack([base, np.roll(base, offset + k + 1), base * (1.0 if k % 2 else -1.0)])
        fields[:, k] = rgb.ravel()
    return fields


def landmark_grid_indices(n: int) -> np.ndarray:
    """A 3x3 pattern of stable landmark vertices on the grid."""
    picks = [n // 5, n // 2, (4 * n) // 5]
    return np.array([r * n + c for r in picks for c in picks], dtype=np.int64)


def make_synthetic_population(spec: SyntheticFaceSpec = SyntheticFaceSpec(), seed: int = 0) -> SyntheticPopulation:
    """Sample a population whose texture is linear in the geometry latent.

    Geometry: z-displacement of a smooth dome by ``n_modes`` sinusoidal
    fields with latent theta ~ N(0, diag(s_k^2)), s_k = 1/(k+1). Texture:
    mean skin tone plus the same theta pushed through fixed RGB fields and
    a decaying coupling, plus optional white noise. At texture_noise = 0
    the texture is an exact linear function of the geometry, so linear
    estimators can recover geometry from texture to numerical precision.
    """
    n = spec.grid_n
    m = n * n
    if spec.n_modes + spec.texture_noise_modes > len(_FREQ_PAIRS) or spec.n_expr_modes > len(_FREQ_PAIRS) - 1:
        raise ValueError("too many modes requested")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFACE]))

    x, y = _grid_xy(n)
    dome = 0.3 * np.sin(np.pi * x) * np.sin(np.pi * y)
    phi = _mode_fields(n, spec.n_modes)
    stds = 1.0 / (np.arange(spec.n_modes) + 1.0)
    theta = stds[:, None] * rng.standard_normal((spec.n_modes, spec.n_samples))

    z = dome[:, None] + spec.geo_scale * (phi @ theta)
    geoms = np.empty((3 * m, spec.n_samples), dtype=np.float64)
    geoms[0::3] = x[:, None]
    geoms[1::3] = y[:, None]
    geoms[2::3] = z

    psi = _texture_fields(n, spec.n_modes)
    coupling = 1.0 / (np.arange(spec.n_modes) + 1.0)
    base_rgb = np.column_stack([np.full(m, 0.70) + 0.10 * (x - 0.5), np.full(m, 0.55) + 0.08 * (y - 0.5), np.full(m, 0.45)])
    textures = base_rgb.ravel()[:, None] + spec.texture_scale * (psi @ (coupling[:, None] * theta))
    if spec.texture_noise > 0:
        if spec.texture_noise_modes > 0:
            psi_noise = _texture_fields(n, spec.texture_noise_modes, offset=spec.n_modes)
            eps = rng.standard_normal((spec.texture_noise_modes, spec.n_samples))
            textures = textures + spec.texture_noise * (psi_noise @ eps)
        else:
            textures = textures + spec.texture_noise * rng.standard_normal(textures.shape)

    mu_expr = 0.5 * np.sin(2.0 * np.pi * x) * np.sin(np.pi * y)
    expr_modes = _mode_fields(n, spec.n_expr_modes + 1)[:, 1:]
    eta = rng.standard_normal((spec.n_expr_modes, spec.n_samples)) / (np.arange(spec.n_expr_modes)[:, None] + 1.0)
    expr_z = spec.expr_scale * (mu_expr[:, None] + expr_modes @ eta)
    expr = np.zeros_like(geoms)
    expr[2::3] = expr_z

    mean_mesh = Mesh(
        geoms.mean(axis=1).reshape(-1, 3),
        make_grid_mesh(n).triangles,
        colors=np.clip(textures.mean(axis=1).reshape(-1, 3), 0.0, 1.0),
        landmarks=landmark_grid_indices(n),
    )
    return SyntheticPopulation(mean_mesh, geoms, textures, theta, expr, landmark_grid_indices(n), spec)
