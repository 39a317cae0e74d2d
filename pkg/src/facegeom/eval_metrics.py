"""Distribution distances for comparing generated and real image sets.

Sliced Wasserstein distance over Laplacian-pyramid patch descriptors
measures multi-resolution similarity of two image collections. Canonical
correlation analysis quantifies linear dependence between two coefficient
sets. Nearest-neighbor descriptor distances summarize how close generated
samples sit to the training set.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve

_GAUSS = np.outer([1.0, 4.0, 6.0, 4.0, 1.0], [1.0, 4.0, 6.0, 4.0, 1.0]) / 256.0


@dataclass(frozen=True)
class PatchSet:
    """Flattened normalized patches from one pyramid level."""

    descriptors: np.ndarray  # (N, d)
    level: int

    def __post_init__(self):
        if self.descriptors.ndim != 2 or len(self.descriptors) < 1:
            raise ValueError("descriptors must be a non-empty (N, d) matrix")


@dataclass(frozen=True)
class Descriptor:
    """A labeled feature vector (e.g. identity coefficients)."""

    vector: np.ndarray
    id: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.vector)):
            raise ValueError(f"descriptor {self.id!r} has non-finite entries")


def _blur(img: np.ndarray) -> np.ndarray:
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = convolve(img[:, :, c], _GAUSS, mode="mirror")
    return out


def _down(img: np.ndarray) -> np.ndarray:
    return _blur(img)[::2, ::2]


def _up(img: np.ndarray) -> np.ndarray:
    h, w, c = img.shape
    z = np.zeros((2 * h, 2 * w, c), dtype=img.dtype)
    z[::2, ::2] = img
    return 4.0 * _blur(z)


def laplacian_pyramid(img: np.ndarray, levels: int) -> list:
    """Band-pass levels plus the final low-pass residual (``levels`` total)."""
    out = []
    for _ in range(levels - 1):
        low = _down(img)
        out.append(img - _up(low))
        img = low
    out.append(img)
    return out


def laplacian_pyramid_patches(images, levels: int, patches_per_image: int = 128, patch: int = 7, rng=0) -> list:
    """Random patch descriptors from every pyramid level of an image set.

    Images must be same-size square float arrays (H, W, C) with
    power-of-two width of at least 16 * 2^levels. Each 7x7xC patch is
    normalized per channel to mean 0 and (floored) standard deviation 1.
    Returns one PatchSet per level, each holding
    len(images) * patches_per_image descriptors.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    images = [np.asarray(im, dtype=np.float64) for im in images]
    if not images:
        raise ValueError("no images given")
    shape = images[0].shape
    if any(im.shape != shape for im in images):
        raise ValueError("images must all share one shape")
    if len(shape) != 3 or shape[0] != shape[1]:
        raise ValueError("images must be square (H, W, C)")
    w = shape[0]
    if w & (w - 1) or w < 16 * 2**levels:
        raise ValueError(f"width must be a power of two >= {16 * 2**levels} for {levels} levels")

    per_level = [[] for _ in range(levels)]
    for img in images:
        for lvl, band in enumerate(laplacian_pyramid(img, levels)):
            hw = band.shape[0]
            rows = rng.integers(0, hw - patch + 1, size=patches_per_image)
            cols = rng.integers(0, hw - patch + 1, size=patches_per_image)
            for r, c in zip(rows, cols):
                per_level[lvl].append(band[r : r + patch, c : c + patch])
    out = []
    for lvl in range(levels):
        block = np.stack(per_level[lvl])  # (N, patch, patch, C)
        n = len(block)
        flat = block.reshape(n, -1, shape[2])
        mean = flat.mean(axis=1, keepdims=True)
        std = np.maximum(flat.std(axis=1, keepdims=True), 1e-8)
        out.append(PatchSet(((flat - mean) / std).reshape(n, -1), lvl))
    return out


def _wasserstein_1d_sorted(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Exact empirical W1 per column of pre-sorted (N, P) projections."""
    na, nb = len(pa), len(pb)
    if na == nb:
        return np.mean(np.abs(pa - pb), axis=0)
    # merge the two quantile grids; each segment has constant quantile functions
    q = np.union1d(np.arange(1, na) / na, np.arange(1, nb) / nb)
    edges = np.concatenate([[0.0], q, [1.0]])
    seg = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    ia = np.minimum((mid * na).astype(np.int64), na - 1)
    ib = np.minimum((mid * nb).astype(np.int64), nb - 1)
    return seg @ np.abs(pa[ia] - pb[ib])


def swd(a: PatchSet, b: PatchSet, n_projections: int = 512, rng=0) -> float:
    """Sliced Wasserstein distance between two descriptor sets.

    Averages the exact 1-D Wasserstein-1 distance of the two sets
    projected onto ``n_projections`` random unit directions. Returns the
    raw value; reports elsewhere scale it by 1e3 for readability.
    Deterministic per seed and symmetric in its arguments.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    da = a.descriptors
    db = b.descriptors
    if da.shape[1] != db.shape[1]:
        raise ValueError(f"descriptor dimensions differ: {da.shape[1]} vs {db.shape[1]}")
    dirs = rng.standard_normal((n_projections, da.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(da @ dirs.T, axis=0)
    pb = np.sort(db @ dirs.T, axis=0)
    return float(np.mean(_wasserstein_1d_sorted(pa, pb)))


def _inv_sqrt_psd(S: np.ndarray, ridge: float = 1e-8):
    evals, evecs = np.linalg.eigh(S)
    vmax = evals.max() if len(evals) else 0.0
    deficient = vmax <= 0 or evals.min() <= 1e-10 * vmax
    if deficient:
        warnings.warn("rank-deficient covariance, applying ridge", RuntimeWarning, stacklevel=3)
        evals = evals + ridge * max(vmax, 1.0)
    return evecs @ ((1.0 / np.sqrt(evals)) * evecs).T


def canonical_correlation(X: np.ndarray, Y: np.ndarray, d: int):
    """Canonical correlations and the first canonical variable pair.

    Standard CCA via SVD of the whitened cross-covariance. Returns
    (correlations descending in [0,1], u, v) where u = X a1, v = Y b1 are
    the projections onto the leading canonical directions. Rank-deficient
    covariances are ridge-regularized (1e-8, with a warning).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
        raise ValueError("X and Y must be (n, p) and (n, q)")
    n, p = X.shape
    q = Y.shape[1]
    if n <= max(p, q):
        raise ValueError(f"need n > max(p, q), got n={n}, p={p}, q={q}")
    if d < 1 or d > min(p, q):
        raise ValueError(f"d must be in [1, {min(p, q)}]")
    xc = X - X.mean(axis=0)
    yc = Y - Y.mean(axis=0)
    sxx = xc.T @ xc / (n - 1)
    syy = yc.T @ yc / (n - 1)
    sxy = xc.T @ yc / (n - 1)
    isx = _inv_sqrt_psd(sxx)
    isy = _inv_sqrt_psd(syy)
    u_dir, s, vt = np.linalg.svd(isx @ sxy @ isy)
    corr = np.clip(s[:d], 0.0, 1.0)
    a1 = isx @ u_dir[:, 0]
    b1 = isy @ vt[0]
    flip = np.sign(a1[np.argmax(np.abs(a1))]) or 1.0
    return corr, xc @ (a1 * flip), yc @ (b1 * flip)


def _as_matrix(items):
    if isinstance(items, np.ndarray):
        return items.astype(np.float64, copy=False)
    items = list(items)
    if not items:
        return np.empty((0, 0), dtype=np.float64)
    return np.stack([np.asarray(it.vector if isinstance(it, Descriptor) else it, dtype=np.float64) for it in items])


def nn_distances(query, reference, chunk: int = 256) -> np.ndarray:
    """Per-query L2 distance to the nearest reference descriptor.

    Accepts Descriptor lists or plain (N, d) arrays. Chunked vectorized
    search over the same per-pair arithmetic as a brute-force double
    loop, so results agree with it bit-exactly.
    """
    qm = _as_matrix(query)
    rm = _as_matrix(reference)
    if len(rm) == 0:
        raise ValueError("empty reference set")
    if qm.shape[1] != rm.shape[1]:
        raise ValueError(f"descriptor dimensions differ: {qm.shape[1]} vs {rm.shape[1]}")
    best = np.empty(len(qm), dtype=np.float64)
    for start in range(0, len(qm), chunk):
        block = qm[start : start + chunk]
        d2 = np.sum((block[:, None, :] - rm[None, :, :]) ** 2, axis=2)
        best[start : start + len(block)] = d2.min(axis=1)
    return np.sqrt(best)


def histogram_summary(values: np.ndarray, bins: int = 20) -> dict:
    """Histogram dict for JSON reports of a distance distribution."""
    hist, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins)
    return {"counts": hist.tolist(), "edges": edges.tolist(), "mean": float(np.mean(values)), "min": float(np.min(values)), "max": float(np.max(values))}


def save_descriptors(path, descriptors) -> None:
    """CSV with one `id,d0,...,dn` row per descriptor."""
    descriptors = list(descriptors)
    if not descriptors:
        raise ValueError("nothing to save")
    dim = len(descriptors[0].vector)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"d{i}" for i in range(dim)])
        for desc in descriptors:
            writer.writerow([desc.id] + [repr(float(x)) for x in desc.vector])


def load_descriptors(path) -> list:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise ValueError("descriptor CSV must start with an 'id,...' header")
        out = []
        for row in reader:
            out.append(Descriptor(np.array([float(x) for x in row[1:]]), row[0]))
    if not out:
        raise ValueError("descriptor CSV has no rows")
    return out
