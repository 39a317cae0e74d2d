"""Linear model of expression displacements.

Built from matched (expression, neutral) geometry pairs: the per-pair
difference vectors are mean-centered and PCA-decomposed. Applying an
expression adds the mean difference plus a basis combination to any
neutral geometry, so the edit is identity-independent by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morphable import LinearModel, build_basis, sample_coefficients


@dataclass(frozen=True)
class ExpressionModel:
    """Mean displacement and orthonormal displacement basis."""

    mean_diff: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    n_train: int

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def as_linear(self) -> LinearModel:
        """The displacement distribution as a plain linear model."""
        return LinearModel(self.mean_diff, self.basis, self.singular_values, self.n_train)

    @classmethod
    def from_linear(cls, model: LinearModel) -> "ExpressionModel":
        return cls(model.mean, model.basis, model.singular_values, model.n_train)


def build_expression_basis(pairs, k_e: int) -> ExpressionModel:
    """PCA of expression-minus-neutral displacement vectors.

    ``pairs`` is a sequence of (g_expr, g_neutral) vectors in aligned
    vertex order. The mean difference is removed before decomposition.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least 2 expression/neutral pairs")
    diffs = np.column_stack([np.asarray(e, dtype=np.float64) - np.asarray(n, dtype=np.float64) for e, n in pairs])
    return ExpressionModel.from_linear(build_basis(diffs, k_e))


def apply_expression(g_neutral: np.ndarray, alpha_exp: np.ndarray, model: ExpressionModel) -> np.ndarray:
    """g_neutral + mean_diff + basis @ alpha_exp."""
    g_neutral = np.asarray(g_neutral, dtype=np.float64)
    alpha_exp = np.asarray(alpha_exp, dtype=np.float64)
    if g_neutral.shape != (model.dim,):
        raise ValueError(f"neutral geometry must have length {model.dim}")
    if alpha_exp.shape != (model.k,):
        raise ValueError(f"expression coefficients must have length {model.k}")
    return g_neutral + model.mean_diff + model.basis @ alpha_exp


def expression_coefficients(g_expr: np.ndarray, g_neutral: np.ndarray, model: ExpressionModel) -> np.ndarray:
    """Coefficients whose application to g_neutral best reproduces g_expr."""
    diff = np.asarray(g_expr, dtype=np.float64) - np.asarray(g_neutral, dtype=np.float64)
    return model.basis.T @ (diff - model.mean_diff)


def sample_expression_coefficients(model: ExpressionModel, rng: np.random.Generator) -> np.ndarray:
    """Draw coefficients from the same Gaussian prior used for identities."""
    return sample_coefficients(model.as_linear(), rng)
