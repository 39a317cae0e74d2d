"""Valid-mask protocol for training on partially corrupted images.

A valid mask is a binary image marking trustworthy pixels. Batches for
an external adversarial trainer carry 4 channels: RGB multiplied by the
mask plus the mask itself as the fourth channel, with the same masks
applied to the real and the generated (fake) batch index-wise, so masks
carry no real-versus-fake signal.

Also provides the synthetic colored-shapes dataset: random non-red
shapes with red circles drawn last as the known corruption, so the
ground-truth mask is exactly the set of pure-red pixels.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

RED = (255, 0, 0)

PALETTE = (
    (40, 90, 200),
    (40, 170, 80),
    (240, 200, 40),
    (40, 190, 200),
    (170, 60, 190),
    (245, 140, 30),
    (120, 120, 120),
    (20, 20, 90),
)


@dataclass(frozen=True)
class ValidMask:
    """Per-pixel {0,1} trust mask."""

    data: np.ndarray  # (H, W) uint8 of 0/1

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.uint8:
            raise ValueError("mask data must be uint8 (H, W)")
        if not np.all((self.data == 0) | (self.data == 1)):
            raise ValueError("mask values must be exactly 0 or 1")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class MaskedBatch:
    """Paired 4-channel real/fake tensors sharing one mask set.

    real/fake are (B, 4, H, W) float32; channel 3 of both equals the mask
    and channels 0..2 are zero wherever the mask is zero.
    """

    real: np.ndarray
    fake: np.ndarray
    masks: tuple

    def __post_init__(self):
        if self.real.shape != self.fake.shape or self.real.ndim != 4 or self.real.shape[1] != 4:
            raise ValueError("real/fake must be matching (B, 4, H, W) tensors")
        if len(self.masks) != self.real.shape[0]:
            raise ValueError("one mask per batch item required")


def _to_float_chw(images) -> np.ndarray:
    arr = np.asarray(images)
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ValueError("images must be (B, H, W, 3)")
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / np.float32(255.0)
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2).astype(np.float32))


def assemble_batch(real_images, fake_images, masks) -> MaskedBatch:
    """Mask and stack matched real/generated images for the trainer.

    The same mask multiplies the RGB channels of real[i] and fake[i] and
    is concatenated as their fourth channel, making the mask channels of
    the two batches bit-identical. Idempotent on already-masked images.
    """
    real = _to_float_chw(real_images)
    fake = _to_float_chw(fake_images)
    if real.shape != fake.shape:
        raise ValueError(f"real/fake batch shapes differ: {real.shape} vs {fake.shape}")
    masks = tuple(masks)
    if len(masks) != real.shape[0]:
        raise ValueError("need exactly one mask per batch item")
    b, _c, h, w = real.shape
    mask_arr = np.empty((b, 1, h, w), dtype=np.float32)
    for i, m in enumerate(masks):
        if not isinstance(m, ValidMask):
            raise ValueError("masks must be ValidMask instances")
        if m.data.shape != (h, w):
            raise ValueError(f"mask {i} shape {m.data.shape} does not match images {(h, w)}")
        mask_arr[i, 0] = m.data
    real4 = np.concatenate([real * mask_arr, mask_arr], axis=1)
    fake4 = np.concatenate([fake * mask_arr, mask_arr], axis=1)
    return MaskedBatch(real4, fake4, masks)


def mask_from_regions(width: int, height: int, regions) -> ValidMask:
    """All-ones mask zeroed inside the given rectangle/ellipse regions.

    Each region is a dict: {"type": "rect", "x0", "y0", "x1", "y1"} with
    half-open pixel bounds, or {"type": "ellipse", "cx", "cy", "rx",
    "ry"}. Pixel membership is tested at pixel centers.
    """
    if width < 1 or height < 1:
        raise ValueError("mask dimensions must be positive")
    data = np.ones((height, width), dtype=np.uint8)
    cx_grid, cy_grid = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    for region in regions:
        kind = region.get("type")
        if kind == "rect":
            x0, y0, x1, y1 = (region[k] for k in ("x0", "y0", "x1", "y1"))
            if not (0 <= x0 <= x1 <= width and 0 <= y0 <= y1 <= height):
                raise ValueError(f"rectangle out of bounds: {region}")
            data[(cy_grid >= y0) & (cy_grid < y1) & (cx_grid >= x0) & (cx_grid < x1)] = 0
        elif kind == "ellipse":
            cx, cy, rx, ry = (region[k] for k in ("cx", "cy", "rx", "ry"))
            if rx <= 0 or ry <= 0 or cx - rx < 0 or cx + rx > width or cy - ry < 0 or cy + ry > height:
                raise ValueError(f"ellipse out of bounds: {region}")
            inside = ((cx_grid - cx) / rx) ** 2 + ((cy_grid - cy) / ry) ** 2 <= 1.0
            data[inside] = 0
        else:
            raise ValueError(f"unknown region type: {kind!r}")
    return ValidMask(data)


def _draw_random_image(size: int, rng: np.random.Generator, n_shapes, radius, n_red) -> np.ndarray:
    img = Image.new("RGB", (size, size), (255, 255, 255))
    draw = ImageDraw.Draw(img)

    def rand_box():
        r = int(rng.integers(radius[0], radius[1] + 1))
        cx = int(rng.integers(0, size))
        cy = int(rng.integers(0, size))
        return cx - r, cy - r, cx + r, cy + r

    count = int(rng.integers(n_shapes[0], n_shapes[1] + 1))
    for _ in range(count):
        color = PALETTE[int(rng.integers(0, len(PALETTE)))]
        kind = int(rng.integers(0, 3))
        box = rand_box()
        if kind == 0:
            draw.ellipse(box, fill=color)
        elif kind == 1:
            draw.rectangle(box, fill=color)
        else:
            x0, y0, x1, y1 = box
            draw.polygon([(x0, y1), (x1, y1), ((x0 + x1) // 2, y0)], fill=color)

    reds = int(rng.integers(n_red[0], n_red[1] + 1))
    for _ in range(reds):  # corruption circles drawn last so nothing overdraws them
        draw.ellipse(rand_box(), fill=RED)
    return np.asarray(img)


def synth_shapes_dataset(count: int, size: int = 256, rng=0, n_shapes=(3, 7), radius=(10, 40), n_red=(0, 2)):
    """Random colored-shapes images with ground-truth corruption masks.

    Each image gets ``n_shapes`` random non-red circles, rectangles, and
    triangles, then ``n_red`` red circles on top as the corruption. The
    mask zeros exactly the pure-red pixels. ``rng`` is an integer seed or
    a Generator; per-image child seeds make generation order-independent
    and reproducible. Returns a list of (uint8 (S,S,3) image, ValidMask).
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    child_seeds = rng.integers(0, 2**63 - 1, size=count)
    out = []
    for seed in child_seeds:
        img = _draw_random_image(size, np.random.default_rng(int(seed)), n_shapes, radius, n_red)
        is_red = np.all(img == np.array(RED, dtype=np.uint8), axis=2)
        mask = ValidMask((~is_red).astype(np.uint8))
        out.append((img, mask))
    return out


def save_mask_png(mask: ValidMask, path) -> None:
    """1-bit-per-pixel PNG."""
    Image.fromarray(mask.data * np.uint8(255)).convert("1").save(path)


def load_mask_png(path) -> ValidMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return ValidMask((arr >= 128).astype(np.uint8))


def export_batch(batch: MaskedBatch, out_dir, prefix: str = "batch") -> dict:
    """Raw float32 NCHW little-endian files plus a JSON manifest.

    Writes `<prefix>_real.f32` and `<prefix>_fake.f32` with the manifest
    describing shape, dtype, and byte order, so any external trainer can
    mmap them without this library.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    manifest = {"dtype": "float32", "byte_order": "little", "layout": "NCHW", "shape": list(batch.real.shape), "files": {}}
    for name, tensor in (("real", batch.real), ("fake", batch.fake)):
        fname = f"{prefix}_{name}.f32"
        with open(os.path.join(out_dir, fname), "wb") as fh:
            fh.write(np.ascontiguousarray(tensor.astype("<f4")).tobytes())
        manifest["files"][name] = fname
    with open(os.path.join(out_dir, f"{prefix}_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
