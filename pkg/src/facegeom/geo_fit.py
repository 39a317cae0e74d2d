"""Estimating plausible geometry for a given facial texture.

Four strategies of increasing use of the texture-geometry dependence:
draw geometry coefficients from the prior (random), copy the geometry of
the nearest training texture in coefficient space (nearest), maximum
a-posteriori inference on a joint texture+geometry basis (ml), and a
least-squares linear regression from texture to geometry coefficients
(ls).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morphable import JointModel, LinearModel, build_joint_basis, project, reconstruct, sample_coefficients


@dataclass(frozen=True)
class LsParams:
    """Texture-to-geometry coefficient regression W with its two models.

    W is (k_t, k_g); geometry coefficients are estimated as W.T @ alpha_t.
    """

    W: np.ndarray
    texture_model: LinearModel = None
    geometry_model: LinearModel = None

    def __post_init__(self):
        if self.texture_model is not None and self.W.shape[0] != self.texture_model.k:
            raise ValueError("W rows must match texture model k")
        if self.geometry_model is not None and self.W.shape[1] != self.geometry_model.k:
            raise ValueError("W columns must match geometry model k")


@dataclass(frozen=True)
class MlParams:
    """Joint-basis MAP estimator parameters.

    sigma_beta is the empirical covariance of training joint coefficients;
    sigma_noise_diag the per-entry texture residual variance (floored to
    stay invertible on noise-free data).
    """

    joint: JointModel
    sigma_beta: np.ndarray
    sigma_noise_diag: np.ndarray

    def __post_init__(self):
        k = self.joint.k
        if self.sigma_beta.shape != (k, k):
            raise ValueError("sigma_beta must be (k, k)")
        if not np.array_equal(self.sigma_beta, self.sigma_beta.T):
            raise ValueError("sigma_beta must be symmetric")
        if self.sigma_noise_diag.shape != (self.joint.basis_t.shape[0],):
            raise ValueError("sigma_noise_diag must have one entry per texture coordinate")
        if np.any(self.sigma_noise_diag <= 0):
            raise ValueError("noise diagonal must be strictly positive")


def fit_random(geom_model: LinearModel, rng: np.random.Generator) -> np.ndarray:
    """Geometry ignoring the texture: a draw from the model prior."""
    return reconstruct(sample_coefficients(geom_model, rng), geom_model)


def fit_nearest(texture: np.ndarray, train_tex_coeffs: np.ndarray, train_geom_coeffs: np.ndarray, texture_model: LinearModel, geometry_model: LinearModel) -> np.ndarray:
    """Geometry of the training sample with the nearest texture coefficients.

    Distance is the L2 norm in texture-coefficient space; ties go to the
    lowest index (argmin's first occurrence).
    """
    if train_tex_coeffs.ndim != 2 or train_tex_coeffs.shape[1] == 0:
        raise ValueError("empty training set")
    if train_tex_coeffs.shape[1] != train_geom_coeffs.shape[1]:
        raise ValueError("texture/geometry training columns must match")
    alpha_t = project(texture, texture_model)
    d = np.sum((train_tex_coeffs - alpha_t[:, None]) ** 2, axis=0)
    return reconstruct(train_geom_coeffs[:, int(np.argmin(d))], geometry_model)


def estimate_ml_params(G: np.ndarray, T: np.ndarray, k: int) -> MlParams:
    """Train the joint-basis MAP estimator on matched geometry/texture columns.

    beta_i are the training coefficients in the stacked basis;
    sigma_beta = (1/(n-1)) sum beta_i beta_i^T, and the texture noise
    variance is the per-entry mean squared reconstruction residual,
    floored at 1e-12 of its maximum so it stays invertible when the
    training data is exactly in the span.
    """
    joint = build_joint_basis(G, T, k)
    stacked = joint.to_stacked()
    data = np.vstack([G, T]).astype(np.float64)
    n = data.shape[1]
    betas = stacked.basis.T @ (data - stacked.mean[:, None])
    sigma_beta = betas @ betas.T / (n - 1)
    sigma_beta = 0.5 * (sigma_beta + sigma_beta.T)

    resid = (T - joint.mean_t[:, None]) - joint.basis_t @ betas
    noise = np.sum(resid**2, axis=1) / (n - 1)
    scale = noise.max() if noise.max() > 0 else 1.0
    noise = np.maximum(noise, 1e-12 * scale)
    return MlParams(joint, sigma_beta, noise)


def fit_ml(texture: np.ndarray, params: MlParams) -> np.ndarray:
    """MAP geometry under the joint model given an observed texture.

    Solves (U_t^T S^-1 U_t + sigma_beta^-1) beta = U_t^T S^-1 (t - mu_t)
    with S the diagonal noise covariance, then maps beta through the
    geometry block: g = U_g beta + mu_g.
    """
    texture = np.asarray(texture, dtype=np.float64)
    joint = params.joint
    if texture.shape != (joint.basis_t.shape[0],):
        raise ValueError(f"texture must have length {joint.basis_t.shape[0]}")
    s_inv = 1.0 / params.sigma_noise_diag
    ut_s = joint.basis_t.T * s_inv
    lhs = ut_s @ joint.basis_t + np.linalg.inv(params.sigma_beta)
    rhs = ut_s @ (texture - joint.mean_t)
    beta = np.linalg.solve(lhs, rhs)
    return joint.basis_g @ beta + joint.mean_g


def train_ls(A_t: np.ndarray, A_g: np.ndarray, texture_model: LinearModel = None, geometry_model: LinearModel = None) -> LsParams:
    """Least-squares map W minimizing ||W^T A_t - A_g||_F.

    Solved through lstsq (pseudo-inverse), which covers the rank-deficient
    case the normal equations cannot.
    """
    A_t = np.asarray(A_t, dtype=np.float64)
    A_g = np.asarray(A_g, dtype=np.float64)
    if A_t.ndim != 2 or A_g.ndim != 2 or A_t.shape[1] != A_g.shape[1]:
        raise ValueError("coefficient matrices must share the sample axis")
    W, *_ = np.linalg.lstsq(A_t.T, A_g.T, rcond=None)
    return LsParams(W, texture_model, geometry_model)


def fit_ls(texture: np.ndarray, params: LsParams) -> np.ndarray:
    """Regressed geometry: project texture, map coefficients, reconstruct."""
    if params.texture_model is None or params.geometry_model is None:
        raise ValueError("LsParams must reference texture and geometry models")
    alpha_t = project(texture, params.texture_model)
    alpha_g = params.W.T @ alpha_t
    return reconstruct(alpha_g, params.geometry_model)


def evaluate_fit(method, test_textures: np.ndarray, test_geometries: np.ndarray):
    """Mean per-vertex L2 error of an estimator on held-out pairs.

    ``method`` maps a texture vector to a geometry vector. For each test
    column the error is the mean over vertices of the Euclidean distance
    between estimated and true positions. Returns (per_sample, mean).
    """
    test_textures = np.asarray(test_textures, dtype=np.float64)
    test_geometries = np.asarray(test_geometries, dtype=np.float64)
    if test_textures.ndim != 2 or test_textures.shape[1] == 0:
        raise ValueError("empty test set")
    if test_textures.shape[1] != test_geometries.shape[1]:
        raise ValueError("texture/geometry test columns must match")
    errors = np.empty(test_textures.shape[1], dtype=np.float64)
    for j in range(test_textures.shape[1]):
        est = method(test_textures[:, j])
        diff = (est - test_geometries[:, j]).reshape(-1, 3)
        errors[j] = float(np.mean(np.linalg.norm(diff, axis=1)))
    return errors, float(errors.mean())
