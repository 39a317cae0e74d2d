"""Raster encode/decode, augmentation involutions, file formats, infill."""
import numpy as np
import pytest

from facegeom.geom_image import (
    GeometryImage,
    MapInvalidError,
    augment_geometry,
    augment_texture,
    infill_pullpush,
    load_gim,
    load_png,
    rasterize,
    sample_back,
    save_gim,
    save_png,
)
from facegeom.parametrize import boundary_embedding, uniform_weights, weighted_embed
from facegeom.synthetic import grid_boundary_anchor, make_grid_mesh


def grid_setup(n=17, seed=0, scale=0.2):
    # smooth height field: the round-trip error of linear rasterization
    # plus bilinear sampling scales with surface curvature, not noise
    rng = np.random.default_rng(seed)
    x, y = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    amps = rng.standard_normal(3)
    z = scale * (
        amps[0] * np.sin(np.pi * x) * np.sin(np.pi * y)
        + amps[1] * np.sin(2 * np.pi * x) * np.sin(np.pi * y)
        + amps[2] * np.sin(np.pi * x) * np.sin(3 * np.pi * y)
    )
    mesh = make_grid_mesh(n, heights=z.ravel())
    loop = mesh.boundary_loop(grid_boundary_anchor(n))
    uv_b, _ = boundary_embedding(mesh.vertices[loop])
    pmap = weighted_embed(mesh, uniform_weights(mesh), loop, uv_b)
    return mesh, pmap


def test_texture_rasterize_and_validation():
    mesh, pmap = grid_setup()
    rng = np.random.default_rng(1)
    colors = rng.uniform(0.0, 1.0, (mesh.n_vertices, 3))
    img = rasterize(mesh, pmap, colors, 64, kind="texture")
    assert img.kind == "texture" and img.norm is None
    assert img.data.dtype == np.float32
    assert img.data.min() >= 0.0 and img.data.max() <= 1.0
    assert np.all(img.data[~img.coverage] == 0.0)
    with pytest.raises(ValueError):
        rasterize(mesh, pmap, colors + 1.0, 64, kind="texture")
    with pytest.raises(ValueError):
        rasterize(mesh, pmap, colors, 63, kind="texture")


def test_geometry_roundtrip_interior():
    mesh, pmap = grid_setup()
    img = rasterize(mesh, pmap, mesh.vertices, 256, kind="geometry")
    back = sample_back(img, pmap)
    rim = np.unique(mesh.boundary_edges)
    interior = np.setdiff1d(np.arange(mesh.n_vertices), rim)
    diag = np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0))
    err = np.linalg.norm(back[interior] - mesh.vertices[interior], axis=1)
    assert err.max() < 1e-3 * diag


def test_geometry_roundtrip_error_shrinks_with_width():
    mesh, pmap = grid_setup(seed=5)
    rim = np.unique(mesh.boundary_edges)
    interior = np.setdiff1d(np.arange(mesh.n_vertices), rim)
    errs = []
    for width in (64, 128, 256):
        img = rasterize(mesh, pmap, mesh.vertices, width, kind="geometry")
        back = sample_back(img, pmap)
        errs.append(np.linalg.norm(back[interior] - mesh.vertices[interior], axis=1).max())
    assert errs[0] > errs[1] > errs[2]


def test_geometry_norm_required_to_cover():
    mesh, pmap = grid_setup()
    tight = np.column_stack([mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)])
    rasterize(mesh, pmap, mesh.vertices, 32, kind="geometry", norm=tight)
    short = tight.copy()
    short[2, 1] = short[2, 1] - 0.5 * (short[2, 1] - short[2, 0])
    with pytest.raises(ValueError):
        rasterize(mesh, pmap, mesh.vertices, 32, kind="geometry", norm=short)


def test_rasterize_rejects_flipped_map():
    mesh, pmap = grid_setup()
    uv = np.array(pmap.uv)
    # collapse an interior vertex onto a neighbor's far side to flip cells
    interior = 8 * 17 + 8
    uv[interior] = uv[interior - 1] - [0.04, 0.0]
    bad = type(pmap).from_uv(mesh, uv)
    with pytest.raises(MapInvalidError):
        rasterize(mesh, bad, np.clip(mesh.vertices, 0, 1), 64, kind="texture")


def test_augment_texture_involution():
    mesh, pmap = grid_setup()
    rng = np.random.default_rng(2)
    colors = rng.uniform(0.0, 1.0, (mesh.n_vertices, 3))
    img = rasterize(mesh, pmap, colors, 32, kind="texture")
    once = augment_texture(img)[1]
    twice = augment_texture(once)[1]
    assert np.array_equal(twice.data, img.data)
    assert np.array_equal(twice.coverage, img.coverage)


def test_augment_geometry_variants():
    mesh, pmap = grid_setup()
    img = rasterize(mesh, pmap, mesh.vertices, 64, kind="geometry")
    variants = augment_geometry(img)
    assert len(variants) == 8
    assert variants[0] is img
    # X-mirror (bit 0) swaps the x norm interval to (C - max, C - min)
    C = float(img.norm[0, 1])
    assert np.allclose(variants[1].norm[0], [C - img.norm[0, 1], C - img.norm[0, 0]])
    # double X-mirror is bit-exact: mirror values live on the 2^-24 grid
    again = augment_geometry(variants[1], C=C)[1]
    assert np.array_equal(again.data, img.data)
    assert np.array_equal(again.coverage, img.coverage)
    assert np.allclose(again.norm, img.norm)
    # Z-only mirror (bit 2) keeps coverage and flips only channel 2
    v4 = variants[4]
    assert np.array_equal(v4.coverage, img.coverage)
    assert np.array_equal(v4.data[:, :, :2], img.data[:, :, :2])
    with pytest.raises(ValueError):
        augment_texture_img = rasterize(mesh, pmap, np.clip(mesh.vertices, 0, 1), 32, kind="texture")
        augment_geometry(augment_texture_img)


def test_gim_roundtrip(tmp_path):
    mesh, pmap = grid_setup()
    img = rasterize(mesh, pmap, mesh.vertices, 32, kind="geometry")
    path = tmp_path / "g.gim"
    save_gim(img, path)
    back = load_gim(path)
    assert np.array_equal(back.data, img.data)
    assert np.array_equal(back.coverage, img.coverage)
    assert np.allclose(back.norm, img.norm)
    assert back.kind == "geometry"


def test_png_roundtrip_8bit(tmp_path):
    mesh, pmap = grid_setup()
    rng = np.random.default_rng(3)
    # quantize to the 8-bit grid first so the round-trip is exact
    colors = np.round(rng.uniform(0.0, 1.0, (mesh.n_vertices, 3)) * 255) / 255
    img = rasterize(mesh, pmap, colors, 32, kind="texture")
    q = GeometryImage(np.round(img.data * 255).astype(np.float32) / np.float32(255), "texture", None, img.coverage)
    path = tmp_path / "t.png"
    save_png(q, path)
    back = load_png(path)
    assert np.max(np.abs(back.data - q.data)) <= 1.0 / 255 / 2
    assert np.array_equal(back.coverage, q.coverage)


def test_infill_fills_everything():
    # the disk's boundary polygon clips the square corners, leaving
    # uncovered pixels for the infill to reach
    from facegeom.parametrize import pick_anchor
    from facegeom.synthetic import make_disk_mesh

    mesh = make_disk_mesh(120, seed=6)
    loop = mesh.boundary_loop(pick_anchor(mesh))
    uv_b, _ = boundary_embedding(mesh.vertices[loop])
    pmap = weighted_embed(mesh, uniform_weights(mesh), loop, uv_b)
    rng = np.random.default_rng(4)
    colors = rng.uniform(0.2, 0.8, (mesh.n_vertices, 3))
    img = rasterize(mesh, pmap, colors, 64, kind="texture")
    assert not img.coverage.all()
    filled = infill_pullpush(img)
    assert filled.coverage.all()
    # covered pixels keep their exact values
    assert np.array_equal(filled.data[img.coverage], img.data[img.coverage])
    # filled pixels stay inside the value range of the source data
    lo, hi = img.data[img.coverage].min(), img.data[img.coverage].max()
    assert filled.data.min() >= lo - 1e-6 and filled.data.max() <= hi + 1e-6


def test_geometry_image_invariants():
    data = np.zeros((8, 8, 3), dtype=np.float32)
    cov = np.zeros((8, 8), dtype=bool)
    img = GeometryImage(data, "texture", None, cov)
    assert img.width == 8 and img.height == 8
    with pytest.raises(ValueError):
        GeometryImage(data, "geometry", None, cov)  # geometry needs norm
    with pytest.raises(ValueError):
        GeometryImage(data.astype(np.float64), "texture", None, cov)
    leak = data.copy()
    leak[0, 0, 0] = 0.5  # nonzero outside coverage
    with pytest.raises(ValueError):
        GeometryImage(leak, "texture", None, cov)
