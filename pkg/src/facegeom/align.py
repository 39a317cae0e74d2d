"""Template-to-scan registration.

Rigid pre-alignment is the closed-form similarity fit to matched
landmarks. Non-rigid refinement moves template vertices down the
gradient of a three-term energy: squared landmark distances, squared
point-to-surface distances from every template vertex to the scan, and
a uniform graph-Laplacian penalty on the displacement field (so constant
offsets are free). Descent uses backtracking, so the energy sequence is
non-increasing by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .mesh import Mesh, SimilarityTransform

_MAX_HALVINGS = 20


@dataclass(frozen=True)
class AlignConfig:
    """Energy weights and descent controls for non-rigid fitting.

    ``schedule`` lists (iteration, smooth_weight) pairs applied once the
    iteration counter reaches each entry; None builds the default
    coarse-to-fine halving of the smoothness weight every max_iters/4.
    """

    landmark_weight: float = 1.0
    surface_weight: float = 1.0
    smooth_weight: float = 1.0
    step_size: float = 0.1
    max_iters: int = 100
    schedule: tuple = None

    def __post_init__(self):
        if min(self.landmark_weight, self.surface_weight, self.smooth_weight) < 0:
            raise ValueError("energy weights must be non-negative")
        if self.landmark_weight == self.surface_weight == self.smooth_weight == 0:
            raise ValueError("at least one energy weight must be positive")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.schedule is not None:
            its = [it for it, _w in self.schedule]
            if any(b <= a for a, b in zip(its, its[1:])):
                raise ValueError("schedule iterations must be strictly increasing")
            if any(w < 0 for _it, w in self.schedule):
                raise ValueError("scheduled weights must be non-negative")
            object.__setattr__(self, "schedule", tuple((int(i), float(w)) for i, w in self.schedule))

    def resolved_schedule(self) -> tuple:
        if self.schedule is not None:
            return self.schedule
        quarter = max(self.max_iters // 4, 1)
        return tuple((k * quarter, self.smooth_weight * 0.5**k) for k in range(1, 4))

    def smooth_weight_at(self, iteration: int) -> float:
        w = self.smooth_weight
        for it, sched_w in self.resolved_schedule():
            if iteration >= it:
                w = sched_w
        return w


def rigid_align(src_landmarks: np.ndarray, dst_landmarks: np.ndarray):
    """Closed-form similarity transform minimizing sum ||s R p + t - q||^2.

    Returns (transform, residual). Needs >= 3 non-collinear source points;
    the rotation determinant is forced positive via the sign trick on the
    cross-covariance SVD.
    """
    src = np.asarray(src_landmarks, dtype=np.float64)
    dst = np.asarray(dst_landmarks, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError("landmark sets must be matched (L, 3) arrays")
    if len(src) < 3:
        raise ValueError("need at least 3 landmark pairs")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xc = src - mu_s
    yc = dst - mu_d
    spread = np.linalg.svd(xc, compute_uv=False)
    if spread[1] <= 1e-12 * max(spread[0], 1.0):
        raise ValueError("degenerate (collinear) landmark configuration")

    sigma = yc.T @ xc / len(src)
    u, d, vt = np.linalg.svd(sigma)
    s_fix = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2] = -1.0
    rot = u @ np.diag(s_fix) @ vt
    var_src = np.mean(np.sum(xc**2, axis=1))
    scale = float(np.sum(d * s_fix) / var_src)
    trans = mu_d - scale * rot @ mu_s
    tf = SimilarityTransform(rot, trans, scale)
    residual = float(np.sum((tf.apply(src) - dst) ** 2))
    return tf, residual


def _surface_closest(points: np.ndarray, scan: Mesh):
    tri = scan.triangles
    v = scan.vertices
    return kernels.closest_points(points, v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]])


def fit_energy(template: Mesh, scan: Mesh, landmark_pairs, config: AlignConfig = None, base_vertices: np.ndarray = None):
    """Raw (unweighted) energy terms at the template's current positions.

    Returns (e_landmark, e_surface, e_smooth). The smoothness term
    penalizes the graph Laplacian of the displacement from
    ``base_vertices`` (default: the current positions, i.e. zero
    displacement, which makes e_smooth 0 for pure evaluation).
    """
    pairs = np.asarray(landmark_pairs, dtype=np.int64).reshape(-1, 2)
    x = template.vertices
    e_lm = float(np.sum((x[pairs[:, 0]] - scan.vertices[pairs[:, 1]]) ** 2)) if len(pairs) else 0.0
    dist_sq, _closest, _idx = _surface_closest(x, scan)
    e_surf = float(np.sum(dist_sq))
    if base_vertices is None:
        e_smooth = 0.0
    else:
        d = x - np.asarray(base_vertices, dtype=np.float64)
        e = template.edges
        e_smooth = float(np.sum((d[e[:, 0]] - d[e[:, 1]]) ** 2))
    return e_lm, e_surf, e_smooth


def _energy_and_grad(x, base, scan, pairs, lw, sw, smw, edges):
    n = len(x)
    grad = np.zeros((n, 3), dtype=np.float64)

    e_lm = 0.0
    if len(pairs) and lw > 0:
        diff = x[pairs[:, 0]] - scan.vertices[pairs[:, 1]]
        e_lm = np.sum(diff**2)
        np.add.at(grad, pairs[:, 0], 2.0 * lw * diff)

    e_surf = 0.0
    if sw > 0:
        dist_sq, closest, _idx = _surface_closest(x, scan)
        e_surf = np.sum(dist_sq)
        # envelope theorem: the closest point moves with x at zero first-order cost
        grad += 2.0 * sw * (x - closest)

    e_smooth = 0.0
    if smw > 0:
        d = x - base
        diff = d[edges[:, 0]] - d[edges[:, 1]]
        e_smooth = np.sum(diff**2)
        np.add.at(grad, edges[:, 0], 2.0 * smw * diff)
        np.add.at(grad, edges[:, 1], -2.0 * smw * diff)

    return lw * e_lm + sw * e_surf + smw * e_smooth, grad


def total_energy(template: Mesh, scan: Mesh, landmark_pairs, config: AlignConfig, base_vertices: np.ndarray = None, iteration: int = 0) -> float:
    """Weighted energy with the smoothness weight in effect at ``iteration``."""
    pairs = np.asarray(landmark_pairs, dtype=np.int64).reshape(-1, 2)
    base = template.vertices if base_vertices is None else np.asarray(base_vertices, dtype=np.float64)
    e, _ = _energy_and_grad(template.vertices, base, scan, pairs, config.landmark_weight, config.surface_weight, config.smooth_weight_at(iteration), template.edges)
    return float(e)


def energy_gradient(template: Mesh, scan: Mesh, landmark_pairs, config: AlignConfig, base_vertices: np.ndarray = None, iteration: int = 0) -> np.ndarray:
    """Analytic gradient of the weighted energy w.r.t. vertex positions."""
    pairs = np.asarray(landmark_pairs, dtype=np.int64).reshape(-1, 2)
    base = template.vertices if base_vertices is None else np.asarray(base_vertices, dtype=np.float64)
    _, g = _energy_and_grad(template.vertices, base, scan, pairs, config.landmark_weight, config.surface_weight, config.smooth_weight_at(iteration), template.edges)
    return g


def nonrigid_fit(template: Mesh, scan: Mesh, landmark_pairs, config: AlignConfig, history: list = None) -> Mesh:
    """Deform the (already rigidly aligned) template onto the scan.

    Gradient descent with backtracking: each iteration halves the step
    until the energy decreases (up to 20 halvings, else it stops).
    ``history`` (if given) collects the accepted energy per iteration,
    evaluated with that iteration's scheduled smoothness weight. The
    sequence is non-increasing because smaller smoothness weights only
    lower the total and steps are accepted only on decrease.
    """
    pairs = np.asarray(landmark_pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs[:, 0].max() >= template.n_vertices or pairs[:, 1].max() >= scan.n_vertices):
        raise ValueError("landmark pair index out of range")
    base = template.vertices.copy()
    x = base.copy()
    edges = template.edges
    lw, sw = config.landmark_weight, config.surface_weight

    for it in range(config.max_iters):
        smw = config.smooth_weight_at(it)
        energy, grad = _energy_and_grad(x, base, scan, pairs, lw, sw, smw, edges)
        if not np.isfinite(energy):
            break
        step = config.step_size
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            x_new = x - step * grad
            e_new, _ = _energy_and_grad(x_new, base, scan, pairs, lw, sw, smw, edges)
            if np.isfinite(e_new) and e_new < energy:
                x = x_new
                energy = e_new
                accepted = True
                break
            step *= 0.5
        if history is not None:
            history.append(float(energy))
        if not accepted:
            break
    return template.with_vertices(x)


def transfer_attributes(points: np.ndarray, scan: Mesh, values: np.ndarray) -> np.ndarray:
    """Sample per-vertex values of the scan at the closest surface points.

    For each query point, finds the nearest point on the scan surface and
    interpolates ``values`` barycentrically inside its triangle. Used to
    pull scan colors onto the fitted template.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != scan.n_vertices:
        raise ValueError("values must be per scan vertex")
    _dist, closest, idx = _surface_closest(points, scan)
    tri = scan.triangles[idx]
    a = scan.vertices[tri[:, 0]]
    ab = scan.vertices[tri[:, 1]] - a
    ac = scan.vertices[tri[:, 2]] - a
    ap = closest - a
    d00 = np.sum(ab * ab, axis=1)
    d01 = np.sum(ab * ac, axis=1)
    d11 = np.sum(ac * ac, axis=1)
    d20 = np.sum(ap * ab, axis=1)
    d21 = np.sum(ap * ac, axis=1)
    denom = d00 * d11 - d01 * d01
    denom = np.where(denom == 0, 1.0, denom)
    v = np.clip((d11 * d20 - d01 * d21) / denom, 0.0, 1.0)
    w = np.clip((d00 * d21 - d01 * d20) / denom, 0.0, 1.0 - v)
    u = 1.0 - v - w
    lam = np.stack([u, v, w], axis=1)
    return np.einsum("pk,pkd->pd", lam, values[tri])
