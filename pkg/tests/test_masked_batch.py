"""Masked-batch assembly and the synthetic colored-shapes dataset."""
import json

import numpy as np
import pytest

from facegeom import (
    MaskedBatch,
    ValidMask,
    assemble_batch,
    export_batch,
    load_mask_png,
    mask_from_regions,
    save_mask_png,
    synth_shapes_dataset,
)
from facegeom.masked_batch import RED


def random_batch(rng, b=4, h=16, w=16):
    real = rng.integers(0, 256, size=(b, h, w, 3), dtype=np.uint8)
    fake = rng.integers(0, 256, size=(b, h, w, 3), dtype=np.uint8)
    masks = [ValidMask((rng.random((h, w)) > 0.3).astype(np.uint8)) for _ in range(b)]
    return real, fake, masks


def test_valid_mask_invariants():
    ValidMask(np.ones((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError, match="uint8"):
        ValidMask(np.ones((4, 4), dtype=np.float32))
    with pytest.raises(ValueError, match="uint8"):
        ValidMask(np.ones(4, dtype=np.uint8))
    with pytest.raises(ValueError, match="0 or 1"):
        ValidMask(np.full((4, 4), 2, dtype=np.uint8))
    m = ValidMask(np.zeros((3, 5), dtype=np.uint8))
    assert (m.height, m.width) == (3, 5)


def test_assemble_layout_and_masking():
    rng = np.random.default_rng(0)
    real, fake, masks = random_batch(rng)
    batch = assemble_batch(real, fake, masks)
    assert batch.real.shape == (4, 4, 16, 16)
    assert batch.real.dtype == np.float32 and batch.fake.dtype == np.float32

    for i, m in enumerate(masks):
        mf = m.data.astype(np.float32)
        # channel 3 is the mask itself, on both sides
        assert np.array_equal(batch.real[i, 3], mf)
        assert np.array_equal(batch.fake[i, 3], mf)
        # RGB is the uint8 image scaled then multiplied by the mask
        want = real[i].astype(np.float32).transpose(2, 0, 1) / np.float32(255.0) * mf
        assert np.array_equal(batch.real[i, :3], want)
        # masked-out pixels are exactly zero
        off = mf == 0
        assert np.all(batch.real[i, :3][:, off] == 0.0)
        assert np.all(batch.fake[i, :3][:, off] == 0.0)


def test_mask_channels_bit_identical():
    rng = np.random.default_rng(7)
    real, fake, masks = random_batch(rng, b=6)
    batch = assemble_batch(real, fake, masks)
    assert batch.real[:, 3].tobytes() == batch.fake[:, 3].tobytes()


def test_assemble_validation():
    rng = np.random.default_rng(1)
    real, fake, masks = random_batch(rng)
    with pytest.raises(ValueError, match="one mask per"):
        assemble_batch(real, fake, masks[:-1])
    with pytest.raises(ValueError, match="shapes differ"):
        assemble_batch(real, fake[:, :8], masks)
    with pytest.raises(ValueError, match="must be \\(B, H, W, 3\\)"):
        assemble_batch(real[..., :2], fake[..., :2], masks)
    bad = masks[:3] + [ValidMask(np.ones((8, 8), dtype=np.uint8))]
    with pytest.raises(ValueError, match="does not match"):
        assemble_batch(real, fake, bad)
    with pytest.raises(ValueError, match="ValidMask"):
        assemble_batch(real, fake, [m.data for m in masks])
    with pytest.raises(ValueError, match="matching"):
        MaskedBatch(np.zeros((2, 3, 4, 4), np.float32), np.zeros((2, 3, 4, 4), np.float32), (None, None))


def test_mask_from_regions():
    m = mask_from_regions(10, 8, [{"type": "rect", "x0": 2, "y0": 1, "x1": 5, "y1": 4}])
    assert m.data.shape == (8, 10)
    assert m.data[1:4, 2:5].sum() == 0
    assert m.data.sum() == 8 * 10 - 9

    e = mask_from_regions(20, 20, [{"type": "ellipse", "cx": 10, "cy": 10, "rx": 4, "ry": 6}])
    # pixel-center membership: center (9.5+dx, ...) inside the ellipse
    cx_grid, cy_grid = np.meshgrid(np.arange(20) + 0.5, np.arange(20) + 0.5)
    inside = ((cx_grid - 10) / 4) ** 2 + ((cy_grid - 10) / 6) ** 2 <= 1.0
    assert np.array_equal(e.data == 0, inside)

    with pytest.raises(ValueError, match="out of bounds"):
        mask_from_regions(10, 10, [{"type": "rect", "x0": -1, "y0": 0, "x1": 5, "y1": 5}])
    with pytest.raises(ValueError, match="out of bounds"):
        mask_from_regions(10, 10, [{"type": "ellipse", "cx": 1, "cy": 5, "rx": 3, "ry": 2}])
    with pytest.raises(ValueError, match="unknown region"):
        mask_from_regions(10, 10, [{"type": "blob"}])
    with pytest.raises(ValueError, match="positive"):
        mask_from_regions(0, 10, [])


def test_mask_png_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    mask = ValidMask((rng.random((33, 47)) > 0.5).astype(np.uint8))
    path = tmp_path / "m.png"
    save_mask_png(mask, path)
    back = load_mask_png(path)
    assert np.array_equal(back.data, mask.data)


def test_synth_shapes_deterministic_and_masks_exact():
    a = synth_shapes_dataset(6, size=64, rng=11)
    b = synth_shapes_dataset(6, size=64, rng=11)
    assert len(a) == 6
    for (img1, m1), (img2, m2) in zip(a, b):
        assert np.array_equal(img1, img2)
        assert np.array_equal(m1.data, m2.data)
    c = synth_shapes_dataset(6, size=64, rng=12)
    assert any(not np.array_equal(x[0], y[0]) for x, y in zip(a, c))

    red = np.array(RED, dtype=np.uint8)
    saw_red = False
    for img, mask in a:
        assert img.shape == (64, 64, 3) and img.dtype == np.uint8
        is_red = np.all(img == red, axis=2)
        assert np.array_equal(mask.data == 0, is_red)
        saw_red = saw_red or bool(is_red.any())
    assert saw_red  # n_red=(0,2) should hit at least one corruption in 6 draws


def test_synth_shapes_accepts_generator():
    gen = np.random.default_rng(5)
    a = synth_shapes_dataset(3, size=32, rng=gen)
    b = synth_shapes_dataset(3, size=32, rng=np.random.default_rng(5))
    for (img1, _), (img2, _) in zip(a, b):
        assert np.array_equal(img1, img2)


def test_export_batch_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    real, fake, masks = random_batch(rng, b=3, h=8, w=8)
    batch = assemble_batch(real, fake, masks)
    manifest = export_batch(batch, tmp_path, prefix="p")

    on_disk = json.loads((tmp_path / "p_manifest.json").read_text())
    assert on_disk == manifest
    assert manifest["shape"] == [3, 4, 8, 8]
    assert manifest["dtype"] == "float32" and manifest["layout"] == "NCHW"

    for name, tensor in (("real", batch.real), ("fake", batch.fake)):
        raw = np.fromfile(tmp_path / manifest["files"][name], dtype="<f4")
        assert np.array_equal(raw.reshape(batch.real.shape), tensor)
