"""End-to-end flows: dataset preparation and face synthesis.

``cmd_prepare`` turns a directory of raw scans into a training dataset:
each scan is rigidly aligned into the template frame, the template is
non-rigidly fitted to it, scan colors are transferred onto the fitted
template, and texture plus geometry images are rasterized through the
shared parametrization (with optional mirror augmentation and validity
masks). ``cmd_synth_face`` runs the reverse direction: a texture (drawn
from the texture model or supplied as an image) is pushed through a
texture-to-geometry estimator and exported as a textured mesh.

Every output directory carries a ``manifest.json`` with the library
version, the config hash, the seed, and a content hash per artifact, so
manifest equality implies byte-identical outputs.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .align import AlignConfig, nonrigid_fit, rigid_align, transfer_attributes
from .expression import ExpressionModel, apply_expression, sample_expression_coefficients
from .geo_fit import fit_ls, fit_ml, fit_nearest, fit_random, train_ls, MlParams
from .geom_image import GeometryImage, augment_geometry, augment_texture, rasterize, sample_back, save_gim, save_png
from .masked_batch import ValidMask, save_mask_png
from .mesh import Mesh, MeshError, load_obj, save_obj
from .morphable import JointModel, LinearModel, load_model, reconstruct, sample_coefficients
from .parametrize import ParamMap, design_weights, pick_anchor, uniform_weights, weighted_embed, boundary_embedding, symmetrize

ESTIMATORS = ("random", "nn", "ml", "ls")
WEIGHT_PRESETS = ("uniform", "design")


def _noop_log(level, event, **fields):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the prepare and synth-face flows need.

    Paths are resolved lazily; ``validate_paths`` checks the referenced
    inputs exist. ``weight_preset`` selects the parametrization weights
    ("uniform" or "design"; the latter reads per-vertex importance from
    ``vertex_weights``). Augmentation toggles control how many image
    variants per scan are written (x2 textures, x8 geometry).
    """

    template: str = ""
    scans: str = ""
    out: str = ""
    models: str = ""
    width: int = 256
    k_texture: int = 20
    k_geometry: int = 20
    seed: int = 0
    weight_preset: str = "uniform"
    vertex_weights: str = ""
    symmetry: str = ""
    augment_textures: bool = True
    augment_geometry: bool = True
    masks: str = ""
    workers: int = 1
    estimator: str = "ls"
    expression_model: str = ""
    map_path: str = ""
    anchor: int = -1
    align: AlignConfig = dataclasses.field(default_factory=AlignConfig)

    def __post_init__(self):
        if self.width < 2 or self.width & (self.width - 1):
            raise ValueError("width must be a power of two >= 2")
        if self.k_texture < 1 or self.k_geometry < 1:
            raise ValueError("k values must be positive")
        if self.anchor < -1:
            raise ValueError("anchor must be -1 (automatic) or a vertex index")
        if self.weight_preset not in WEIGHT_PRESETS:
            raise ValueError(f"weight_preset must be one of {WEIGHT_PRESETS}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        align = data.pop("align", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if align is not None:
            if isinstance(align, dict):
                sched = align.get("schedule")
                if sched is not None:
                    align = {**align, "schedule": tuple(tuple(e) for e in sched)}
                align = AlignConfig(**align)
            data["align"] = align
        return cls(**data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        sched = d["align"]["schedule"]
        if sched is not None:
            d["align"]["schedule"] = [list(e) for e in sched]
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def validate_paths(self, need=("template", "scans")) -> None:
        for name in need:
            value = getattr(self, name)
            if not value:
                raise ValueError(f"config is missing the '{name}' path")
            if not Path(value).exists():
                raise FileNotFoundError(f"{name} path does not exist: {value}")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, payload: dict, artifacts) -> dict:
    """Write ``manifest.json`` listing a sha256 per artifact.

    ``artifacts`` are paths under ``out_dir``; keys in the manifest are
    their posix-style relative paths. Deterministic byte-for-byte: sorted
    keys, no timestamps.
    """
    out_dir = Path(out_dir)
    hashes = {}
    for p in artifacts:
        p = Path(p)
        hashes[p.relative_to(out_dir).as_posix()] = _sha256_file(p)
    manifest = {**payload, "version": __version__, "artifacts": hashes}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def template_parametrization(template: Mesh, config: PipelineConfig) -> ParamMap:
    """The dataset-wide map: template connectivity embedded in the unit square.

    The boundary anchor comes from ``config.anchor``, or from
    ``pick_anchor`` when that is -1, so the map is a pure function of the
    config and the template file.
    """
    anchor = config.anchor if config.anchor >= 0 else pick_anchor(template)
    loop = template.boundary_loop(anchor)
    loop_uv, _t = boundary_embedding(template.vertices[loop])
    uniform = weighted_embed(template, uniform_weights(template), loop, loop_uv)
    if config.weight_preset == "uniform":
        pmap = uniform
    else:
        if config.vertex_weights:
            with open(config.vertex_weights) as fh:
                vw = np.asarray(json.load(fh), dtype=np.float64)
        else:
            vw = np.ones(template.n_vertices)
        pmap = weighted_embed(template, design_weights(template, vw, uniform), loop, loop_uv)
    if config.symmetry:
        with open(config.symmetry) as fh:
            pairs = json.load(fh)
        pmap = symmetrize(pmap, template, pairs)
    return pmap


def _landmark_pairs(template: Mesh, scan: Mesh):
    if template.landmarks is None or scan.landmarks is None:
        raise MeshError("template and scan both need landmark sidecars")
    if len(template.landmarks) != len(scan.landmarks):
        raise MeshError("template and scan landmark counts differ")
    return np.column_stack([template.landmarks, scan.landmarks])


def fit_scan(template: Mesh, scan: Mesh, config: AlignConfig) -> Mesh:
    """Register one scan: rigid into the template frame, then non-rigid fit.

    Returns the fitted template carrying colors transferred from the scan
    surface. Raises MeshError when the scan lacks colors or landmarks.
    """
    if scan.colors is None:
        raise MeshError("scan has no vertex colors to transfer")
    pairs = _landmark_pairs(template, scan)
    tf, _residual = rigid_align(scan.vertices[pairs[:, 1]], template.vertices[pairs[:, 0]])
    scan_aligned = scan.with_vertices(tf.apply(scan.vertices))
    fitted = nonrigid_fit(template, scan_aligned, pairs, config)
    colors = np.clip(transfer_attributes(fitted.vertices, scan_aligned, scan_aligned.colors), 0.0, 1.0)
    return Mesh(fitted.vertices, template.triangles, colors=colors, landmarks=template.landmarks)


def _load_mask(config: PipelineConfig, stem: str) -> ValidMask:
    if config.masks:
        candidate = Path(config.masks) / f"{stem}.png"
        if candidate.exists():
            from .masked_batch import load_mask_png

            mask = load_mask_png(candidate)
            if mask.width != config.width or mask.height != config.width:
                raise ValueError(f"mask {candidate.name} is {mask.width}x{mask.height}, expected {config.width}")
            return mask
    return ValidMask(np.ones((config.width, config.width), dtype=np.uint8))


def cmd_prepare(config: PipelineConfig, log=_noop_log) -> dict:
    """Build the training dataset directory from raw scans.

    Two passes: fit all scans (parallel across ``config.workers``
    threads), then rasterize with a dataset-global geometry normalization
    so every geometry image shares one coordinate encoding. A scan that
    fails any stage is recorded under ``failures`` and skipped; the rest
    of the dataset still builds. Returns the manifest dict.
    """
    config.validate_paths(("template", "scans"))
    out = Path(config.out)
    template = load_obj(config.template)
    scan_paths = sorted(Path(config.scans).glob("*.obj"))
    if not scan_paths:
        raise FileNotFoundError(f"no .obj scans found in {config.scans}")
    log("info", "prepare.start", template=str(config.template), n_scans=len(scan_paths), out=str(out))

    pmap = template_parametrization(template, config)
    for sub in ("meshes", "textures", "geometry", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    artifacts = []
    map_path = out / "map.uv.json"
    pmap.save(map_path)
    artifacts.append(map_path)

    failures: dict[str, str] = {}
    fitted: dict[str, Mesh] = {}

    def run_fit(path: Path):
        scan = load_obj(path)
        return fit_scan(template, scan, config.align)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {path.stem: pool.submit(run_fit, path) for path in scan_paths}
    for stem in sorted(futures):
        try:
            fitted[stem] = futures[stem].result()
            log("info", "prepare.fit", scan=stem)
        except (MeshError, ValueError, RuntimeError, OSError) as exc:
            failures[stem] = str(exc)
            log("warning", "prepare.fit_failed", scan=stem, error=str(exc))

    norm = None
    if fitted:
        stacked = np.concatenate([m.vertices for m in fitted.values()], axis=0)
        norm = np.column_stack([stacked.min(axis=0), stacked.max(axis=0)])
        span = norm[:, 1] - norm[:, 0]
        pad = np.where(span < 1e-12, 0.5, 0.0)  # flat axis: avoid a zero span
        norm = np.column_stack([norm[:, 0] - pad, norm[:, 1] + pad])

    for stem in sorted(fitted):
        mesh = fitted[stem]
        try:
            mesh_path = out / "meshes" / f"{stem}.obj"
            save_obj(mesh, mesh_path)
            tex = rasterize(mesh, pmap, mesh.colors, config.width, kind="texture")
            textures = augment_texture(tex) if config.augment_textures else [tex]
            geo = rasterize(mesh, pmap, mesh.vertices, config.width, kind="geometry", norm=norm)
            geos = augment_geometry(geo) if config.augment_geometry else [geo]
            mask = _load_mask(config, stem)

            artifacts.extend([mesh_path, Path(str(mesh_path) + ".landmarks.json")])
            for i, t in enumerate(textures):
                p = out / "textures" / f"{stem}.t{i}.png"
                save_png(t, p)
                artifacts.append(p)
            for i, g in enumerate(geos):
                p = out / "geometry" / f"{stem}.g{i}.gim"
                save_gim(g, p)
                artifacts.extend([p, Path(str(p) + ".json")])
            # one mask per texture variant, flipped in step with the image
            masks = [mask, ValidMask(mask.data[:, ::-1].copy())][: len(textures)]
            for i, m in enumerate(masks):
                mask_path = out / "masks" / f"{stem}.t{i}.png"
                save_mask_png(m, mask_path)
                artifacts.append(mask_path)
            log("info", "prepare.rasterized", scan=stem, textures=len(textures), geometry=len(geos))
        except (MeshError, ValueError, RuntimeError, OSError) as exc:
            failures[stem] = str(exc)
            log("warning", "prepare.rasterize_failed", scan=stem, error=str(exc))

    payload = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "n_scans": len(scan_paths),
        "n_ok": len(scan_paths) - len(failures),
        "failures": failures,
        "norm": [[float(a), float(b)] for a, b in norm] if norm is not None else None,
    }
    manifest = write_manifest(out, payload, artifacts)
    log("info", "prepare.done", n_ok=payload["n_ok"], n_failed=len(failures))
    return manifest


def load_mesh_dir(data_dir, need_colors: bool = True):
    """Load a directory of same-connectivity OBJ meshes, sorted by stem.

    Returns (stems, meshes). Connectivity is checked against the first
    mesh; a mismatch is a data error.
    """
    paths = sorted(Path(data_dir).glob("*.obj"))
    if not paths:
        raise FileNotFoundError(f"no .obj meshes found in {data_dir}")
    meshes = [load_obj(p) for p in paths]
    first = meshes[0]
    for p, m in zip(paths, meshes):
        if m.n_vertices != first.n_vertices or not np.array_equal(m.triangles, first.triangles):
            raise MeshError(f"{p.name}: connectivity differs from {paths[0].name}")
        if need_colors and m.colors is None:
            raise MeshError(f"{p.name}: missing vertex colors")
    return [p.stem for p in paths], meshes


def mesh_matrices(meshes) -> tuple[np.ndarray, np.ndarray | None]:
    """(3m, n) geometry and texture matrices from a mesh list."""
    G = np.stack([m.vertices.ravel() for m in meshes], axis=1)
    T = None
    if all(m.colors is not None for m in meshes):
        T = np.stack([m.colors.ravel() for m in meshes], axis=1)
    return G, T


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing {what}: {path}")
    return path


def load_estimator(models_dir, method: str, rng: np.random.Generator | None = None):
    """Texture-vector -> geometry-vector callable for a trained models dir.

    Conventions: ``texture.fgm`` / ``geometry.fgm`` with training
    coefficients in ``<name>.fgm.coeffs.npy`` beside them, and
    ``joint.fgm`` + ``joint.fgm.aux.npz`` (sigma_beta, sigma_noise) for
    the MAP estimator. The LS map is re-derived from the stored training
    coefficients at load time, which is cheap and keeps one source of
    truth. Returns (estimate, geometry_model).
    """
    if method not in ESTIMATORS:
        raise ValueError(f"method must be one of {ESTIMATORS}")
    models_dir = Path(models_dir)
    geom_model = load_model(_require(models_dir / "geometry.fgm", "geometry model"))

    if method == "random":
        if rng is None:
            raise ValueError("the random estimator needs an rng")
        return (lambda t: fit_random(geom_model, rng)), geom_model

    if method == "ml":
        joint = JointModel.from_stacked(load_model(_require(models_dir / "joint.fgm", "joint model")))
        aux = np.load(_require(models_dir / "joint.fgm.aux.npz", "joint aux arrays"))
        params = MlParams(joint, aux["sigma_beta"], aux["sigma_noise"])
        return (lambda t: fit_ml(t, params)), geom_model

    tex_model = load_model(_require(models_dir / "texture.fgm", "texture model"))
    A_t = np.load(_require(models_dir / "texture.fgm.coeffs.npy", "texture training coefficients"))
    A_g = np.load(_require(models_dir / "geometry.fgm.coeffs.npy", "geometry training coefficients"))
    if method == "nn":
        return (lambda t: fit_nearest(t, A_t, A_g, tex_model, geom_model)), geom_model
    params = train_ls(A_t, A_g, tex_model, geom_model)
    return (lambda t: fit_ls(t, params)), geom_model


def cmd_synth_face(
    config: PipelineConfig,
    texture_source,
    rng: np.random.Generator,
    expr_coeffs: np.ndarray | None = None,
    expr_sample: bool = False,
    log=_noop_log,
) -> dict:
    """Synthesize one textured face into ``config.out``.

    ``texture_source`` is None to sample the texture model prior, a flat
    (3m,) texture vector, or a texture GeometryImage (lifted per vertex
    through the map, which then must be configured). Geometry comes from
    ``config.estimator``; an expression model, when configured, displaces
    the neutral result (coefficients given, sampled, or zero). Writes
    ``face.obj`` (+ texture PNG when a map is configured) and the
    manifest; returns the manifest dict.
    """
    config.validate_paths(("template", "models"))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    template = load_obj(config.template)
    pmap = None
    if config.map_path:
        pmap = ParamMap.load(config.map_path, template)

    models_dir = Path(config.models)
    if texture_source is None:
        tex_model = load_model(_require(models_dir / "texture.fgm", "texture model"))
        texture = reconstruct(sample_coefficients(tex_model, rng), tex_model)
        log("info", "synth.texture_sampled", k=tex_model.k)
    elif isinstance(texture_source, GeometryImage):
        if pmap is None:
            raise ValueError("lifting a texture image requires the map path")
        texture = sample_back(texture_source, pmap).ravel()
        log("info", "synth.texture_lifted", width=texture_source.width)
    else:
        texture = np.asarray(texture_source, dtype=np.float64).ravel()
    if texture.shape != (3 * template.n_vertices,):
        raise ValueError(f"texture length {texture.shape[0]} does not match the template")
    texture = np.clip(texture, 0.0, 1.0)

    estimate, _geom_model = load_estimator(models_dir, config.estimator, rng)
    geometry = estimate(texture)
    log("info", "synth.geometry", estimator=config.estimator)

    if config.expression_model:
        model = ExpressionModel.from_linear(load_model(_require(Path(config.expression_model), "expression model")))
        if expr_sample:
            alpha = sample_expression_coefficients(model, rng)
        elif expr_coeffs is not None:
            alpha = np.asarray(expr_coeffs, dtype=np.float64)
        else:
            alpha = np.zeros(model.k)
        geometry = apply_expression(geometry, alpha, model)
        log("info", "synth.expression", k=model.k, sampled=bool(expr_sample))

    if geometry.shape != (3 * template.n_vertices,):
        raise ValueError("geometry model dimension does not match the template")
    face = Mesh(
        geometry.reshape(-1, 3),
        template.triangles,
        colors=texture.reshape(-1, 3),
        landmarks=template.landmarks,
    )
    face_path = out / "face.obj"
    save_obj(face, face_path)
    artifacts = [face_path]
    if face.landmarks is not None:
        artifacts.append(Path(str(face_path) + ".landmarks.json"))
    if pmap is not None:
        png_path = out / "face.png"
        save_png(rasterize(face, pmap, face.colors, config.width, kind="texture"), png_path)
        artifacts.append(png_path)

    payload = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "estimator": config.estimator,
    }
    manifest = write_manifest(out, payload, artifacts)
    log("info", "synth.done", out=str(out))
    return manifest
