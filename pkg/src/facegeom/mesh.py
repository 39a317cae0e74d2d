"""Triangle mesh container, topology queries and OBJ I/O."""
from __future__ import annotations

import json
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Invalid mesh topology, geometry or file content."""


class SimilarityTransform:
    """Rigid rotation + translation + uniform scale.

    Maps a point p to ``scale * rotation @ p + translation``.
    """

    def __init__(self, rotation, translation, scale):
        rotation = np.asarray(rotation, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64)
        scale = float(scale)
        if rotation.shape != (3, 3):
            raise MeshError("rotation must be 3x3")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > 1e-10:
            raise MeshError("rotation is not orthonormal")
        if np.linalg.det(rotation) < 0:
            raise MeshError("rotation has negative determinant (reflection)")
        if scale <= 0:
            raise MeshError("scale must be positive")
        self.rotation = rotation
        self.translation = translation
        self.scale = scale

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 3) array of points."""
        points = np.asarray(points, dtype=np.float64)
        return self.scale * points @ self.rotation.T + self.translation

    def __repr__(self):
        return f"SimilarityTransform(scale={self.scale:.6g}, t={self.translation})"


class Mesh:
    """Immutable triangulated surface with optional per-vertex color and landmarks.

    Parameters
    ----------
    vertices : (n, 3) float array
        Vertex positions.
    triangles : (t, 3) int array
        Vertex index triples, consistently counter-clockwise oriented.
    colors : (n, 3) float array, optional
        Per-vertex RGB in [0, 1].
    landmarks : sequence of int, optional
        Ordered landmark vertex indices.

    Raises ``MeshError`` on out-of-range indices, degenerate triangles,
    non-manifold edges or inconsistent orientation.
    """

    def __init__(self, vertices, triangles, colors=None, landmarks=None):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"triangles must be (t, 3), got {triangles.shape}")
        n = len(vertices)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= n):
            raise MeshError("triangle index out of range")
        degen = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 2] == triangles[:, 0])
        )
        if degen.any():
            raise MeshError(f"degenerate triangle at index {int(np.nonzero(degen)[0][0])}")

        self.vertices = vertices
        self.triangles = triangles
        self.colors = None
        if colors is not None:
            colors = np.ascontiguousarray(colors, dtype=np.float64)
            if colors.shape != (n, 3):
                raise MeshError(f"colors must be ({n}, 3), got {colors.shape}")
            self.colors = colors
            self.colors.flags.writeable = False
        self.landmarks = None
        if landmarks is not None:
            landmarks = [int(i) for i in landmarks]
            if any(i < 0 or i >= n for i in landmarks):
                raise MeshError("landmark index out of range")
            self.landmarks = landmarks

        self.vertices.flags.writeable = False
        self.triangles.flags.writeable = False
        self._check_manifold()

    # -- topology -----------------------------------------------------------

    def _directed_edges(self) -> np.ndarray:
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    def _check_manifold(self):
        de = self._directed_edges()
        if len(de) == 0:
            return
        # a repeated directed edge means non-manifold or flipped orientation
        _, counts = np.unique(de, axis=0, return_counts=True)
        if counts.max() > 1:
            raise MeshError("repeated directed edge: non-manifold or inconsistent orientation")
        und = np.sort(de, axis=1)
        _, ucounts = np.unique(und, axis=0, return_counts=True)
        if ucounts.max() > 2:
            raise MeshError("non-manifold edge (more than 2 incident triangles)")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (e, 2) array with edge[0] < edge[1]."""
        und = np.sort(self._directed_edges(), axis=1)
        return np.unique(und, axis=0)

    @cached_property
    def _edge_valence(self) -> np.ndarray:
        und = np.sort(self._directed_edges(), axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        return counts

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Undirected edges bordered by exactly one triangle."""
        return self.edges[self._edge_valence == 1]

    @cached_property
    def _neighbor_lists(self) -> list[np.ndarray]:
        nbrs: list[set] = [set() for _ in range(self.n_vertices)]
        for i, j in self.edges:
            nbrs[i].add(int(j))
            nbrs[j].add(int(i))
        return [np.array(sorted(s), dtype=np.int64) for s in nbrs]

    def one_ring(self, vertex: int) -> np.ndarray:
        """Indices of vertices sharing an edge with ``vertex``, ascending."""
        if vertex < 0 or vertex >= self.n_vertices:
            raise MeshError(f"vertex index {vertex} out of range")
        return self._neighbor_lists[vertex]

    def boundary_loop(self, anchor: int) -> np.ndarray:
        """Ordered boundary vertices starting at ``anchor``.

        The loop is closed (last vertex connects back to the first) and
        traversed counter-clockwise with respect to the outward surface
        normal, which for consistently CCW-oriented triangles is the
        direction of the once-occurring directed edges.
        """
        de = self._directed_edges()
        de_set = {(int(a), int(b)) for a, b in de}
        boundary = [(a, b) for a, b in de_set if (b, a) not in de_set]
        if not boundary:
            raise MeshError("mesh has no boundary")
        nxt = {}
        for a, b in boundary:
            if a in nxt:
                raise MeshError("vertex on more than one boundary edge pair")
            nxt[a] = b
        if anchor not in nxt:
            raise MeshError(f"anchor vertex {anchor} is not on the boundary")
        loop = [anchor]
        cur = nxt[anchor]
        while cur != anchor:
            loop.append(cur)
            cur = nxt[cur]
            if len(loop) > len(boundary):
                raise MeshError("boundary walk did not close")
        if len(loop) != len(boundary):
            raise MeshError("multiple boundary loops")
        return np.array(loop, dtype=np.int64)

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Copy of this mesh with replaced vertex positions."""
        return Mesh(vertices, self.triangles, colors=self.colors, landmarks=self.landmarks)


# -- OBJ + landmark sidecar I/O ----------------------------------------------


def load_obj(path) -> Mesh:
    """Load an ASCII OBJ file (triangles only, 1-based indices).

    ``v`` records may carry the common per-vertex color extension
    (``v x y z r g b``). ``vt`` records are parsed and validated but not
    stored. A landmark sidecar ``<path>.landmarks.json`` is read when
    present.
    """
    path = Path(path)
    vertices: list[list[float]] = []
    colors: list[list[float]] = []
    n_texcoords = 0
    faces: list[list[int]] = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) not in (4, 7):
                        raise MeshError("expected 'v x y z' or 'v x y z r g b'")
                    vertices.append([float(x) for x in parts[1:4]])
                    if len(parts) == 7:
                        colors.append([float(x) for x in parts[4:7]])
                elif tag == "vt":
                    if len(parts) < 3:
                        raise MeshError("expected 'vt u v'")
                    float(parts[1]), float(parts[2])
                    n_texcoords += 1
                elif tag == "f":
                    if len(parts) != 4:
                        raise MeshError("non-triangle face")
                    idx = []
                    for token in parts[1:]:
                        v_str = token.split("/")[0]
                        v_idx = int(v_str)
                        if v_idx < 0:
                            raise MeshError("negative OBJ indices are not supported")
                        idx.append(v_idx - 1)
                    faces.append(idx)
            except MeshError as exc:
                raise MeshError(f"{path.name}:{lineno}: {exc}") from None
            except ValueError:
                raise MeshError(f"{path.name}:{lineno}: cannot parse '{line}'") from None
    if colors and len(colors) != len(vertices):
        raise MeshError(f"{path.name}: colors present on only some vertices")
    landmarks = None
    sidecar = landmark_sidecar_path(path)
    if sidecar.exists():
        landmarks = load_landmarks(sidecar)
    return Mesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        colors=np.array(colors, dtype=np.float64) if colors else None,
        landmarks=landmarks,
    )


def save_obj(mesh: Mesh, path, uv: np.ndarray | None = None, texture_name: str | None = None):
    """Write an ASCII OBJ file; per-vertex colors are appended to ``v`` records.

    When ``uv`` (per-vertex [0,1]^2 coordinates) is given, ``vt`` records are
    written and faces reference them. ``texture_name`` adds a minimal MTL
    sidecar pointing at the texture image.
    """
    path = Path(path)
    lines = []
    if texture_name is not None:
        mtl_path = path.with_suffix(".mtl")
        with open(mtl_path, "w") as fh:
            fh.write(f"newmtl material0\nmap_Kd {texture_name}\n")
        lines.append(f"mtllib {mtl_path.name}")
        lines.append("usemtl material0")
    if mesh.colors is not None:
        for p, c in zip(mesh.vertices, mesh.colors):
            lines.append(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {c[0]:.17g} {c[1]:.17g} {c[2]:.17g}")
    else:
        for p in mesh.vertices:
            lines.append(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    if uv is not None:
        uv = np.asarray(uv, dtype=np.float64)
        if uv.shape != (mesh.n_vertices, 2):
            raise MeshError(f"uv must be ({mesh.n_vertices}, 2)")
        for q in uv:
            lines.append(f"vt {q[0]:.17g} {q[1]:.17g}")
        for t in mesh.triangles:
            lines.append(f"f {t[0]+1}/{t[0]+1} {t[1]+1}/{t[1]+1} {t[2]+1}/{t[2]+1}")
    else:
        for t in mesh.triangles:
            lines.append(f"f {t[0]+1} {t[1]+1} {t[2]+1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if mesh.landmarks is not None:
        save_landmarks(landmark_sidecar_path(path), mesh.landmarks)


def landmark_sidecar_path(obj_path) -> Path:
    """Sidecar path for an OBJ file: ``<mesh>.landmarks.json``."""
    obj_path = Path(obj_path)
    return obj_path.with_suffix(obj_path.suffix + ".landmarks.json")


def load_landmarks(path) -> list[int]:
    with open(path, "r") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "indices" not in data:
        raise MeshError(f"{path}: expected a JSON object with an 'indices' array")
    return [int(i) for i in data["indices"]]


def save_landmarks(path, indices):
    with open(path, "w") as fh:
        json.dump({"indices": [int(i) for i in indices]}, fh)
