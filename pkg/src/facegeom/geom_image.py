"""Canonical square images of per-vertex attributes, and back.

A mesh with a flip-free unit-square parametrization turns any per-vertex
3-vector field (RGB texture or XYZ geometry) into a W x W raster by
barycentric interpolation at pixel centers, and the raster samples back
to vertices bilinearly. Geometry rasters are affinely normalized to
[0,1] per channel with the (min, max) pair recorded, so one decoder
setting serves a whole dataset.

Pixel convention: pixel (row r, col c) samples uv = ((c+0.5)/W,
(r+0.5)/H) with the uv origin at the bottom-left, i.e. row 0 is the
bottom of the square. PNG export flips rows to the usual top-down order.

Normalized geometry values are snapped to the 2^-24 grid at encode time.
On that grid the mirror map v -> 1 - v is exact in float32, which makes
the mirror augmentations true involutions at the bit level; the snap
perturbs values by at most 2^-25 of the channel range.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import kernels
from .mesh import Mesh
from .parametrize import ParamMap

_QUANT = float(2**24)

KINDS = ("texture", "geometry")


class MapInvalidError(ValueError):
    """The parametrization double-covers a pixel (flipped triangles)."""


def _check_pow2(x: int) -> None:
    if x < 1 or x & (x - 1):
        raise ValueError(f"image dimension must be a power of two, got {x}")


@dataclass(frozen=True)
class GeometryImage:
    """A float32 (H, W, 3) raster plus interpretation metadata.

    ``norm`` is the per-channel (min, max) used to map raw values into
    [0,1] for geometry kind (None for texture). ``coverage`` marks pixels
    whose center fell inside the mapped mesh; everything else is zero.
    """

    data: np.ndarray
    kind: str
    norm: np.ndarray | None
    coverage: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.data.ndim != 3 or self.data.shape[2] != 3 or self.data.dtype != np.float32:
            raise ValueError("data must be float32 (H, W, 3)")
        h, w = self.data.shape[:2]
        _check_pow2(w)
        _check_pow2(h)
        if self.coverage.shape != (h, w) or self.coverage.dtype != np.bool_:
            raise ValueError("coverage must be bool (H, W)")
        if self.kind == "geometry":
            if self.norm is None or np.asarray(self.norm).shape != (3, 2):
                raise ValueError("geometry kind requires a (3, 2) norm")
        if np.any(self.data[~self.coverage]):
            raise ValueError("pixels outside coverage must be zero")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def _normalize(attr: np.ndarray, norm: np.ndarray) -> np.ndarray:
    span = norm[:, 1] - norm[:, 0]
    span = np.where(span == 0, 1.0, span)
    return (attr - norm[:, 0]) / span


def rasterize(mesh: Mesh, pmap: ParamMap, attribute: np.ndarray, width: int, kind: str = "texture", norm: np.ndarray | None = None) -> GeometryImage:
    """Interpolate a per-vertex 3-vector field onto the unit-square raster.

    Texture attributes must already be in [0,1]. Geometry attributes are
    normalized per channel by ``norm`` (computed from this attribute when
    not given; pass the dataset-global min/max when encoding a corpus).
    A pixel center claimed by two triangles means the map has flips and
    raises MapInvalidError.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    _check_pow2(width)
    if not pmap.matches(mesh):
        raise ValueError("parametrization does not belong to this mesh")
    attribute = np.asarray(attribute, dtype=np.float64)
    if attribute.shape != (mesh.n_vertices, 3):
        raise ValueError(f"attribute must be ({mesh.n_vertices}, 3)")

    if kind == "texture":
        if attribute.min() < 0.0 or attribute.max() > 1.0:
            raise ValueError("texture attributes must lie in [0, 1]")
        values = attribute
        out_norm = None
    else:
        if norm is None:
            norm = np.column_stack([attribute.min(axis=0), attribute.max(axis=0)])
        norm = np.asarray(norm, dtype=np.float64)
        if norm.shape != (3, 2):
            raise ValueError("norm must be (3, 2) per-channel (min, max)")
        values = _normalize(attribute, norm)
        if values.min() < -1e-9 or values.max() > 1.0 + 1e-9:
            raise ValueError("norm does not cover the attribute range")
        values = np.clip(values, 0.0, 1.0)
        out_norm = norm

    tri = mesh.triangles
    uv = pmap.uv
    img, mask, _owner, n_overlap = kernels.rasterize(
        uv[tri[:, 0]], uv[tri[:, 1]], uv[tri[:, 2]],
        values[tri[:, 0]], values[tri[:, 1]], values[tri[:, 2]],
        width, width,
    )
    if n_overlap:
        raise MapInvalidError(f"{n_overlap} pixels covered by more than one triangle")
    coverage = mask.astype(bool)
    img = np.clip(img, 0.0, 1.0) if kind == "texture" else np.round(np.clip(img, 0.0, 1.0) * _QUANT) / _QUANT
    img[~coverage] = 0.0
    return GeometryImage(np.ascontiguousarray(img, dtype=np.float32), kind, out_norm, coverage)


def sample_back(image: GeometryImage, pmap: ParamMap) -> np.ndarray:
    """Bilinear per-vertex samples of the raster, de-normalized for geometry.

    Taps falling outside coverage are dropped and the remaining weights
    renormalized; a vertex with no covered tap raises (its uv is outside
    the rasterized region).
    """
    uv = pmap.uv
    h, w = image.height, image.width
    x = uv[:, 0] * w - 0.5
    y = uv[:, 1] * h - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0

    acc = np.zeros((len(uv), 3), dtype=np.float64)
    wacc = np.zeros(len(uv), dtype=np.float64)
    data = image.data.astype(np.float64)
    cov = image.coverage
    for dy in (0, 1):
        for dx in (0, 1):
            c = np.clip(x0 + dx, 0, w - 1)
            r = np.clip(y0 + dy, 0, h - 1)
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            wgt = wgt * cov[r, c]
            acc += wgt[:, None] * data[r, c]
            wacc += wgt
    dead = wacc == 0
    if np.any(dead):
        raise ValueError(f"{int(dead.sum())} vertices sample outside coverage")
    out = acc / wacc[:, None]
    if image.kind == "geometry":
        norm = image.norm
        out = out * (norm[:, 1] - norm[:, 0]) + norm[:, 0]
    return out


def _flip_columns(image: GeometryImage) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(image.data[:, ::-1]), np.ascontiguousarray(image.coverage[:, ::-1])


def augment_texture(image: GeometryImage) -> list[GeometryImage]:
    """[original, horizontally mirrored] pair for dataset doubling.

    Pure column permutation, so applying the flip twice is bit-exact.
    Meaningful only for maps that are symmetric about x = 0.5.
    """
    data, cov = _flip_columns(image)
    return [image, GeometryImage(data, image.kind, image.norm, cov)]


def _mirror_values(channel: np.ndarray, cov: np.ndarray) -> np.ndarray:
    # exact on the 2^-24 grid rasterize produces; uncovered pixels stay 0
    mirrored = (1.0 - channel.astype(np.float64)).astype(np.float32)
    return np.where(cov, mirrored, np.float32(0.0))


def augment_geometry(image: GeometryImage, C: float | None = None) -> list[GeometryImage]:
    """All 8 independent X/Y/Z channel mirrors of a geometry raster.

    Output i has channel c mirrored iff bit c of i is set; output 0 is
    the input itself. The X mirror realizes x -> C - x in de-normalized
    units (C defaults to the recorded X maximum) which swaps the X norm
    to (C - max, C - min); since the normalized values then transform as
    v -> 1 - v, the stored pixels change identically for every channel.
    The X mirror is paired with a horizontal image flip so mirrored
    faces stay consistent with a left/right-symmetric parametrization.
    Some variants invert surface orientation; downstream consumers decide
    whether that is acceptable.
    """
    if image.kind != "geometry":
        raise ValueError("geometry augmentation requires a geometry-kind image")
    norm = image.norm
    if C is None:
        C = float(norm[0, 1])
    out = [image]
    for bits in range(1, 8):
        data = image.data.copy()
        cov = image.coverage
        new_norm = np.array(norm, dtype=np.float64)
        for ch in range(3):
            if bits >> ch & 1:
                data[:, :, ch] = _mirror_values(image.data[:, :, ch], cov)
                if ch == 0:
                    new_norm[0] = (C - norm[0, 1], C - norm[0, 0])
        if bits & 1:
            data = data[:, ::-1]
            cov = cov[:, ::-1]
        out.append(GeometryImage(np.ascontiguousarray(data), "geometry", new_norm, np.ascontiguousarray(cov)))
    return out


def _rle_encode(flat: np.ndarray) -> list[int]:
    flat = flat.astype(np.uint8)
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [len(flat)]])
    return [int(flat[0])] + np.diff(bounds).astype(int).tolist()


def _rle_decode(rle: list[int], size: int) -> np.ndarray:
    value = rle[0]
    out = np.empty(size, dtype=bool)
    pos = 0
    for run in rle[1:]:
        out[pos : pos + run] = bool(value)
        pos += run
        value ^= 1
    if pos != size:
        raise ValueError("coverage run-length data does not match image size")
    return out


def save_gim(image: GeometryImage, path) -> None:
    """Raw planar float32 little-endian pixels plus a JSON sidecar.

    The `.gim` file holds the 3 channel planes back to back; `<path>.json`
    records width/height/channels/kind/norm and a run-length encoded
    coverage mask (an extension readers may ignore, reconstructing
    coverage as the any-nonzero pixels at a small risk of dropping
    covered pixels that are exactly zero on all channels).
    """
    planes = np.ascontiguousarray(image.data.transpose(2, 0, 1).astype("<f4"))
    with open(path, "wb") as fh:
        fh.write(planes.tobytes())
    norm = image.norm if image.norm is not None else np.array([[0.0, 1.0]] * 3)
    sidecar = {
        "width": image.width,
        "height": image.height,
        "channels": 3,
        "kind": image.kind,
        "norm": [[float(a), float(b)] for a, b in norm],
        "coverage_rle": _rle_encode(image.coverage.ravel()),
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh)


def load_gim(path) -> GeometryImage:
    with open(str(path) + ".json", "r") as fh:
        side = json.load(fh)
    w, h, ch = side["width"], side["height"], side["channels"]
    if ch != 3:
        raise ValueError(f"expected 3 channels, sidecar says {ch}")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != ch * h * w:
        raise ValueError("pixel payload does not match sidecar dimensions")
    data = np.ascontiguousarray(raw.reshape(ch, h, w).transpose(1, 2, 0))
    if "coverage_rle" in side:
        coverage = _rle_decode(side["coverage_rle"], h * w).reshape(h, w)
    else:
        coverage = np.any(data != 0, axis=2)
    kind = side["kind"]
    norm = np.array(side["norm"], dtype=np.float64) if kind == "geometry" else None
    return GeometryImage(data, kind, norm, coverage)


def save_png(image: GeometryImage, path) -> None:
    """8-bit RGBA PNG with alpha carrying the coverage mask (rows top-down)."""
    rgb = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    alpha = (image.coverage * np.uint8(255))[..., None]
    rgba = np.concatenate([rgb, alpha], axis=2)[::-1]
    Image.fromarray(rgba, mode="RGBA").save(path)


def load_png(path, kind: str = "texture", norm: np.ndarray | None = None) -> GeometryImage:
    arr = np.asarray(Image.open(path).convert("RGBA"))[::-1]
    coverage = arr[:, :, 3] >= 128
    data = (arr[:, :, :3].astype(np.float32) / np.float32(255.0))
    data[~coverage] = 0.0
    if kind == "geometry" and norm is None:
        raise ValueError("loading geometry kind from PNG requires the norm")
    return GeometryImage(np.ascontiguousarray(data), kind, None if kind == "texture" else np.asarray(norm, dtype=np.float64), coverage)


def infill_pullpush(image: GeometryImage) -> GeometryImage:
    """Fill uncovered pixels by pull-push interpolation.

    Optional cosmetic step for training exports: repeated 2x down-average
    of covered pixels, then upsample back filling only the holes. Covered
    pixels are bit-identical to the input; the result reports full
    coverage (keep the original image when the true support matters).
    """
    data = image.data.astype(np.float64)
    weight = image.coverage.astype(np.float64)
    levels = [(data * weight[..., None], weight)]
    while levels[-1][0].shape[0] > 1:
        d, w_ = levels[-1]
        h2, w2 = d.shape[0] // 2, d.shape[1] // 2
        d2 = d.reshape(h2, 2, w2, 2, 3).sum(axis=(1, 3))
        wsum = w_.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
        levels.append((d2, wsum))
    filled_d, filled_w = levels[-1]
    filled = filled_d / np.maximum(filled_w, 1e-12)[..., None]
    for d, w_ in reversed(levels[:-1]):
        up = np.repeat(np.repeat(filled, 2, axis=0), 2, axis=1)
        have = w_ > 0
        filled = np.where(have[..., None], d / np.maximum(w_, 1e-12)[..., None], up)
    out = np.where(image.coverage[..., None], image.data, np.clip(filled, 0.0, 1.0).astype(np.float32))
    return GeometryImage(np.ascontiguousarray(out), image.kind, image.norm, np.ones_like(image.coverage))
