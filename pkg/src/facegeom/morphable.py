"""Linear statistical models of per-vertex attributes.

A model is the top-k left singular subspace of mean-centered training
columns: sample = mean + basis @ coefficients. Texture and geometry use
the same machinery; the joint variant stacks both attribute vectors and
keeps the row blocks separate for cross-modality estimation.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"FGM1"
_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class LinearModel:
    """Mean plus orthonormal basis with per-direction singular values."""

    mean: np.ndarray  # (dim,)
    basis: np.ndarray  # (dim, k), orthonormal columns
    singular_values: np.ndarray  # (k,), positive descending
    n_train: int

    def __post_init__(self):
        dim, k = self.basis.shape
        if self.mean.shape != (dim,) or self.singular_values.shape != (k,):
            raise ValueError("inconsistent model array shapes")
        if k > min(dim, self.n_train):
            raise ValueError(f"k={k} exceeds min(dim, n_train)={min(dim, self.n_train)}")
        if np.any(np.diff(self.singular_values) > 0) or np.any(self.singular_values <= 0):
            raise ValueError("singular values must be positive and descending")
        gram = self.basis.T @ self.basis
        if np.abs(gram - np.eye(k)).max() > _ORTHO_TOL:
            raise ValueError("basis columns are not orthonormal")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class JointModel:
    """Shared-coefficient model over stacked geometry and texture rows.

    ``basis_g`` and ``basis_t`` are the upper and lower row blocks of the
    stacked orthonormal basis; individually they are not orthonormal, only
    their vertical concatenation is.
    """

    mean_g: np.ndarray
    mean_t: np.ndarray
    basis_g: np.ndarray  # (dim_half, k)
    basis_t: np.ndarray  # (dim_half, k)
    singular_values: np.ndarray
    n_train: int

    def __post_init__(self):
        stacked = np.vstack([self.basis_g, self.basis_t])
        k = stacked.shape[1]
        gram = stacked.T @ stacked
        if np.abs(gram - np.eye(k)).max() > _ORTHO_TOL:
            raise ValueError("stacked basis is not orthonormal")

    @property
    def k(self) -> int:
        return self.basis_g.shape[1]

    def to_stacked(self) -> LinearModel:
        """View as a plain model over the concatenated attribute vector."""
        return LinearModel(
            np.concatenate([self.mean_g, self.mean_t]),
            np.vstack([self.basis_g, self.basis_t]),
            self.singular_values,
            self.n_train,
        )

    @classmethod
    def from_stacked(cls, model: LinearModel) -> "JointModel":
        if model.dim % 2:
            raise ValueError("stacked model dimension must be even")
        h = model.dim // 2
        return cls(model.mean[:h], model.mean[h:], model.basis[:h], model.basis[h:], model.singular_values, model.n_train)


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def _centered_svd(data: np.ndarray):
    """Left singular vectors and values of the centered data columns.

    Goes through the n x n Gram matrix when samples are fewer than rows,
    which is the common regime (a few hundred scans of many vertices).
    """
    dim, n = data.shape
    mean = data.mean(axis=1)
    centered = data - mean[:, None]
    if n < dim:
        gram = centered.T @ centered
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        s = np.sqrt(evals)
        # the Gram route squares the conditioning: values below
        # sqrt(eps)-relative are numerical noise whose directions would
        # not come out orthonormal, so report them as rank deficiency
        floor = np.sqrt(max(dim, n) * np.finfo(np.float64).eps) * (s[0] if len(s) else 0.0)
        s[s <= floor] = 0.0
        nonzero = s > 0
        u = np.zeros((dim, n), dtype=np.float64)
        u[:, nonzero] = (centered @ evecs[:, order][:, nonzero]) / s[nonzero]
    else:
        u, s, _ = np.linalg.svd(centered, full_matrices=False)
    return mean, u, s


def _rank(s: np.ndarray, dim: int, n: int) -> int:
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(dim, n) * np.finfo(np.float64).eps * s[0]))


def build_basis(data: np.ndarray, k: int) -> LinearModel:
    """Top-k principal directions of (dim, n) training columns.

    The sign of each basis column is normalized (largest-magnitude entry
    positive) so results are deterministic across runs and platforms.
    Raises when k exceeds min(dim, n) or the attainable numerical rank.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be a (dim, n) matrix")
    dim, n = data.shape
    if n < 2:
        raise ValueError("need at least 2 training samples")
    if k < 1 or k > min(dim, n):
        raise ValueError(f"k must be in [1, {min(dim, n)}], got {k}")
    mean, u, s = _centered_svd(data)
    rank = _rank(s, dim, n)
    if k > rank:
        raise ValueError(f"data supports rank {rank}, requested k={k}")
    return LinearModel(mean, _fix_signs(u[:, :k]), s[:k].copy(), n)


def project(sample: np.ndarray, model: LinearModel) -> np.ndarray:
    """Coefficients of a sample in the model basis: basisᵀ(sample − mean)."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.shape != (model.dim,):
        raise ValueError(f"sample must have length {model.dim}, got {sample.shape}")
    return model.basis.T @ (sample - model.mean)


def reconstruct(coeffs: np.ndarray, model: LinearModel) -> np.ndarray:
    """Attribute vector from coefficients: mean + basis @ coeffs."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (model.k,):
        raise ValueError(f"coefficients must have length {model.k}, got {coeffs.shape}")
    return model.mean + model.basis @ coeffs


def coefficient_stds(model: LinearModel) -> np.ndarray:
    """Per-direction prior standard deviations sigma_i = delta_i / sqrt(n)."""
    return model.singular_values / np.sqrt(model.n_train)


def sample_coefficients(model: LinearModel, rng: np.random.Generator) -> np.ndarray:
    """Draw coefficients from the Gaussian prior N(0, delta_i^2 / n)."""
    return coefficient_stds(model) * rng.standard_normal(model.k)


def build_joint_basis(G: np.ndarray, T: np.ndarray, k: int) -> JointModel:
    """Shared-coefficient model of vertically stacked geometry and texture.

    Columns of G and T must be the same subjects in the same order.
    """
    G = np.asarray(G, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if G.ndim != 2 or T.ndim != 2 or G.shape[1] != T.shape[1]:
        raise ValueError("G and T must be matrices with matched column counts")
    return JointModel.from_stacked(build_basis(np.vstack([G, T]), k))


def save_model(model: LinearModel, path) -> None:
    """Write the portable binary model format.

    Layout: magic "FGM1"; little-endian u32 dim, k, n_train; float64
    arrays mean (dim), singular_values (k), basis (dim x k column-major).
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", model.dim, model.k, model.n_train))
        fh.write(model.mean.astype("<f8").tobytes())
        fh.write(model.singular_values.astype("<f8").tobytes())
        fh.write(np.asfortranarray(model.basis.astype("<f8")).tobytes(order="F"))


def load_model(path) -> LinearModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not a model file (magic {magic!r})")
        dim, k, n_train = struct.unpack("<III", fh.read(12))
        mean = np.frombuffer(fh.read(8 * dim), dtype="<f8").copy()
        s = np.frombuffer(fh.read(8 * k), dtype="<f8").copy()
        basis = np.frombuffer(fh.read(8 * dim * k), dtype="<f8").reshape((dim, k), order="F").copy()
        if fh.read(1):
            raise ValueError("trailing bytes in model file")
    return LinearModel(mean, basis, s, int(n_train))
