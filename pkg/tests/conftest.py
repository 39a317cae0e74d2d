"""Shared fixtures: small meshes and a cached synthetic population."""
import numpy as np
import pytest

from facegeom.synthetic import SyntheticFaceSpec, make_grid_mesh, make_synthetic_population


@pytest.fixture(scope="session")
def grid12():
    return make_grid_mesh(12)


@pytest.fixture(scope="session")
def bumpy_grid():
    n = 14
    rng = np.random.default_rng(42)
    x, y = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    z = 0.2 * np.sin(np.pi * x) * np.sin(np.pi * y) + 0.01 * rng.standard_normal((n, n))
    z[0, :] = z[-1, :] = z[:, 0] = z[:, -1] = 0.0
    return make_grid_mesh(n, heights=z.ravel())


@pytest.fixture(scope="session")
def small_pop():
    """40-sample coupled population on a 16-grid, noise-free."""
    return make_synthetic_population(SyntheticFaceSpec(grid_n=16, n_modes=6, n_samples=40), seed=0)


def batch_project(data, model):
    """Columns of ``data`` projected onto the model basis, (k, n)."""
    return model.basis.T @ (data - model.mean[:, None])
