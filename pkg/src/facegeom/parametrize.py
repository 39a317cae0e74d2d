"""Planar mesh parametrization onto the unit square.

Boundary vertices are pinned to the square perimeter by 3D arc length;
interior vertices solve the barycentric system u_i = sum_j lambda_ij u_j
with lambda_ij = w_ij / sum_j w_ij, which minimizes
sum_{(i,j) in E} w_ij ||u_i - u_j||^2 for symmetric positive weights.
With a convex boundary this embedding has no flipped triangles.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, MeshError

RESIDUAL_TOL = 1e-8
_DIRECT_SOLVE_LIMIT = 20000


class SolveError(RuntimeError):
    """Linear system could not be solved to tolerance."""


def mesh_fingerprint(mesh: Mesh) -> str:
    """Stable hash of the mesh connectivity, used to pair maps with meshes.

    Deliberately ignores vertex positions: a map is universal across all
    meshes in dense correspondence (same vertex count and triangles).
    """
    h = hashlib.sha256()
    h.update(np.int64(mesh.n_vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.triangles).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class ParamMap:
    """Per-vertex UV coordinates in [0,1]^2 sharing the source connectivity."""

    uv: np.ndarray
    n_vertices: int
    n_triangles: int
    mesh_hash: str

    @classmethod
    def from_uv(cls, mesh: Mesh, uv: np.ndarray) -> "ParamMap":
        uv = np.ascontiguousarray(uv, dtype=np.float64)
        if uv.shape != (mesh.n_vertices, 2):
            raise ValueError(f"uv must be ({mesh.n_vertices}, 2), got {uv.shape}")
        uv.flags.writeable = False
        return cls(uv, mesh.n_vertices, mesh.n_triangles, mesh_fingerprint(mesh))

    def matches(self, mesh: Mesh) -> bool:
        return self.mesh_hash == mesh_fingerprint(mesh)

    def save(self, path):
        """Write the mesh fingerprint and UV coordinates as JSON."""
        with open(path, "w") as fh:
            json.dump({"mesh": self.mesh_hash, "uv": [[float(x), float(y)] for x, y in self.uv]}, fh)

    @classmethod
    def load(cls, path, mesh: Mesh) -> "ParamMap":
        """Read a saved map and bind it to ``mesh``.

        Accepts either a bare JSON array of [x, y] pairs or the dict form
        written by ``save``; the latter carries the source mesh
        fingerprint and raises MeshError when it does not match, so a
        stale map cannot silently pair with the wrong connectivity.
        """
        with open(path, "r") as fh:
            payload = json.load(fh)
        fingerprint = None
        if isinstance(payload, dict):
            fingerprint = payload["mesh"]
            payload = payload["uv"]
        uv = np.array(payload, dtype=np.float64)
        if uv.shape != (mesh.n_vertices, 2) or (fingerprint is not None and fingerprint != mesh_fingerprint(mesh)):
            raise MeshError(f"{path}: parametrization belongs to a different mesh")
        return cls.from_uv(mesh, uv)


@dataclass(frozen=True)
class EdgeWeights:
    """Positive symmetric per-edge scalars, aligned with ``mesh.edges`` rows."""

    edges: np.ndarray  # (e, 2), each row sorted ascending
    values: np.ndarray  # (e,)

    def __post_init__(self):
        if len(self.edges) != len(self.values):
            raise ValueError("edges and values must have equal length")
        if np.any(self.values <= 0):
            raise ValueError("edge weights must be strictly positive")

    def scaled(self, factor: float) -> "EdgeWeights":
        return EdgeWeights(self.edges, self.values * factor)


def uniform_weights(mesh: Mesh) -> EdgeWeights:
    """Unit weight on every edge (the uniform barycentric parametrization)."""
    return EdgeWeights(mesh.edges, np.ones(len(mesh.edges), dtype=np.float64))


def design_weights(mesh: Mesh, vertex_weights: np.ndarray, uniform_map: ParamMap) -> EdgeWeights:
    """Edge weights from per-vertex importance values.

    Each edge takes the average of its two endpoint weights, normalized by
    the squared edge length in the uniform embedding so a unit vertex
    weighting reproduces the uniform solution's per-edge stiffness.
    """
    vertex_weights = np.asarray(vertex_weights, dtype=np.float64)
    if vertex_weights.shape != (mesh.n_vertices,):
        raise ValueError(f"vertex_weights must be ({mesh.n_vertices},)")
    if np.any(vertex_weights <= 0):
        raise ValueError("vertex weights must be strictly positive")
    edges = mesh.edges
    uv = uniform_map.uv
    lengths_sq = np.sum((uv[edges[:, 0]] - uv[edges[:, 1]]) ** 2, axis=1)
    if np.any(lengths_sq == 0):
        raise ValueError("uniform map has a zero-length edge")
    pair_mean = 0.5 * (vertex_weights[edges[:, 0]] + vertex_weights[edges[:, 1]])
    return EdgeWeights(edges, pair_mean / lengths_sq)


def square_perimeter(t) -> np.ndarray:
    """Point(s) on the unit-square perimeter at parameter t in [0, 1].

    Traversal is counter-clockwise starting at the bottom-center (0.5, 0),
    with C(0) = C(1). The coordinate lying on a side is exact (0.0 or 1.0).
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any((t < 0) | (t > 1)):
        raise ValueError("perimeter parameter must lie in [0, 1]")
    s = 4.0 * t
    out = np.empty((len(s), 2), dtype=np.float64)
    for i, si in enumerate(s):
        if si < 0.5:
            out[i] = (0.5 + si, 0.0)
        elif si < 1.5:
            out[i] = (1.0, si - 0.5)
        elif si < 2.5:
            out[i] = (2.5 - si, 1.0)
        elif si < 3.5:
            out[i] = (0.0, 3.5 - si)
        else:
            out[i] = (si - 3.5, 0.0)
    return out


def boundary_embedding(loop_positions: np.ndarray, curve=square_perimeter):
    """Arc-length placement of an ordered boundary loop on a convex curve.

    ``loop_positions`` are the 3D positions in loop order, the first entry
    being the anchor mapped to curve(0). Returns (uv (K, 2), t (K,)) where
    t[i] is the normalized cumulative length up to vertex i (t[0] = 0).
    """
    pos = np.asarray(loop_positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 3:
        raise ValueError("loop_positions must be (K>=3, 3)")
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    if np.any(seg == 0) or np.linalg.norm(pos[0] - pos[-1]) == 0:
        raise ValueError("zero-length boundary edge")
    total = seg.sum() + np.linalg.norm(pos[0] - pos[-1])
    t = np.concatenate([[0.0], np.cumsum(seg) / total])
    return curve(t), t


def pick_anchor(mesh: Mesh) -> int:
    """Deterministic boundary anchor: nearest the bottom-center of the rim.

    The anchor lands on curve(0), the midpoint of the square's bottom side,
    so starting the loop near the middle of the rim's lowest stretch keeps
    sharp rim corners away from the flat sides of the square. Anchoring at
    a rim corner instead shears the corner cells into slivers whose signed
    area can round to zero. Ties break toward the lowest y, then the
    smallest vertex index.
    """
    rim = np.unique(mesh.boundary_edges)
    x = mesh.vertices[rim, 0]
    y = mesh.vertices[rim, 1]
    cx = 0.5 * (x.min() + x.max())
    order = np.lexsort((rim, y, np.abs(x - cx)))
    return int(rim[order[0]])


def _weight_matrix(mesh: Mesh, weights: EdgeWeights) -> sp.csr_matrix:
    e = weights.edges
    w = weights.values
    i = np.concatenate([e[:, 0], e[:, 1]])
    j = np.concatenate([e[:, 1], e[:, 0]])
    return sp.csr_matrix((np.concatenate([w, w]), (i, j)), shape=(mesh.n_vertices,) * 2)


def weighted_embed(mesh: Mesh, weights: EdgeWeights, loop: np.ndarray, loop_uv: np.ndarray) -> ParamMap:
    """Solve the barycentric system for interior UVs given pinned boundary.

    The symmetric form (D - W) u = W[:, boundary] u_boundary is solved with
    a direct sparse factorization below ``_DIRECT_SOLVE_LIMIT`` interior
    vertices and conjugate gradient above. The row-normalized residual of
    the barycentric equations must come out below ``RESIDUAL_TOL`` in the
    infinity norm, and the result must have no flipped triangles.
    """
    loop = np.asarray(loop, dtype=np.int64)
    loop_uv = np.asarray(loop_uv, dtype=np.float64)
    n = mesh.n_vertices
    W = _weight_matrix(mesh, weights)
    deg = np.diff(W.indptr)
    is_boundary = np.zeros(n, dtype=bool)
    is_boundary[loop] = True
    if np.any(deg[~is_boundary] < 3):
        raise MeshError("interior vertex of degree < 3")

    uv = np.zeros((n, 2), dtype=np.float64)
    uv[loop] = loop_uv
    interior = np.nonzero(~is_boundary)[0]
    if len(interior):
        W_ii = W[interior][:, interior]
        W_ib = W[interior][:, loop]
        d = np.asarray(W[interior].sum(axis=1)).ravel()
        A = sp.diags(d) - W_ii
        rhs = W_ib @ loop_uv
        if len(interior) < _DIRECT_SOLVE_LIMIT:
            try:
                lu = spla.splu(A.tocsc())
            except RuntimeError as exc:
                raise SolveError(f"singular interior system: {exc}") from None
            sol = np.column_stack([lu.solve(rhs[:, 0]), lu.solve(rhs[:, 1])])
        else:
            sol = np.empty_like(rhs)
            for k in range(2):
                x, info = spla.cg(A, rhs[:, k], rtol=1e-12, atol=0.0, maxiter=10 * n)
                if info != 0:
                    raise SolveError(f"conjugate gradient did not converge (info={info})")
                sol[:, k] = x
        uv[interior] = sol

        row_sums = np.asarray(W.sum(axis=1)).ravel()
        residual = uv[interior] - (W @ uv)[interior] / row_sums[interior, None]
        res_inf = np.abs(residual).max() if residual.size else 0.0
        if res_inf >= RESIDUAL_TOL:
            raise SolveError(f"barycentric residual {res_inf:.3e} exceeds {RESIDUAL_TOL}")

    pmap = ParamMap.from_uv(mesh, uv)
    flipped = flipped_triangles(mesh, pmap.uv)
    if len(flipped):
        raise SolveError(f"{len(flipped)} flipped triangles in embedding")
    return pmap


def planar_areas(mesh: Mesh, uv: np.ndarray) -> np.ndarray:
    """Signed planar triangle areas of a UV layout."""
    p0 = uv[mesh.triangles[:, 0]]
    p1 = uv[mesh.triangles[:, 1]]
    p2 = uv[mesh.triangles[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def flipped_triangles(mesh: Mesh, uv: np.ndarray) -> np.ndarray:
    """Indices of triangles with non-positive signed area in the plane."""
    return np.nonzero(planar_areas(mesh, uv) <= 0)[0]


def symmetrize(pmap: ParamMap, mesh: Mesh, pairs) -> ParamMap:
    """Enforce left/right mirror symmetry about x = 0.5 by averaging.

    ``pairs`` is a sequence of (left, right) vertex index pairs covering
    every vertex; midline vertices are self-paired and land exactly on
    x = 0.5. The pairing must map mesh edges to mesh edges.
    """
    uv = np.array(pmap.uv, dtype=np.float64)
    n = len(uv)
    sigma = np.full(n, -1, dtype=np.int64)
    for left, right in pairs:
        left, right = int(left), int(right)
        if sigma[left] != -1 or (sigma[right] != -1 and right != left):
            raise ValueError(f"vertex appears in more than one pair ({left}, {right})")
        sigma[left] = right
        sigma[right] = left
    if np.any(sigma < 0):
        raise ValueError("pairing does not cover all vertices")

    edge_set = {(int(a), int(b)) for a, b in mesh.edges}
    for a, b in mesh.edges:
        ma, mb = int(sigma[a]), int(sigma[b])
        if (min(ma, mb), max(ma, mb)) not in edge_set:
            raise ValueError("pairing inconsistent with connectivity")

    out = np.empty_like(uv)
    seen = np.zeros(n, dtype=bool)
    for left in range(n):
        right = int(sigma[left])
        if seen[left]:
            continue
        if right == left:
            out[left] = (0.5, uv[left, 1])
        else:
            x = 0.5 * (uv[left, 0] + 1.0 - uv[right, 0])
            y = 0.5 * (uv[left, 1] + uv[right, 1])
            out[left] = (x, y)
            out[right] = (1.0 - x, y)
            seen[right] = True
        seen[left] = True
    return ParamMap.from_uv(mesh, out)
