"""Command-line entry points.

One executable, ``facegeom``, with a subcommand per pipeline stage. All
diagnostics go to stderr as line-delimited JSON events; stdout is
reserved for data a script might consume (CSV rows, report lines). Exit
codes: 0 success, 1 usage error, 2 data error (missing or malformed
inputs), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from ._version import __version__
from . import pipeline
from .align import AlignConfig, nonrigid_fit, rigid_align, transfer_attributes
from .expression import ExpressionModel, apply_expression, build_expression_basis
from .eval_metrics import laplacian_pyramid_patches, swd
from .geo_fit import estimate_ml_params, evaluate_fit
from .geom_image import load_gim, load_png, rasterize, sample_back, save_gim, save_png
from .masked_batch import assemble_batch, export_batch, load_mask_png, save_mask_png, synth_shapes_dataset
from .mesh import Mesh, MeshError, load_obj, save_obj
from .morphable import build_basis, load_model, save_model
from .parametrize import (
    ParamMap,
    SolveError,
    boundary_embedding,
    design_weights,
    pick_anchor,
    symmetrize,
    uniform_weights,
    weighted_embed,
)

_LEVELS = {"debug": 10, "info": 20, "warning": 30, "error": 40}


class JsonLogger:
    """Line-delimited JSON events on stderr."""

    def __init__(self, min_level: str = "info", stream=None):
        self.min_level = _LEVELS[min_level]
        self.stream = stream if stream is not None else sys.stderr

    def __call__(self, level: str, event: str, **fields):
        if _LEVELS[level] < self.min_level:
            return
        record = {"level": level, "event": event}
        record.update(fields)
        print(json.dumps(record, sort_keys=True, default=str), file=self.stream)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_config_file(path) -> dict:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def _align_config(ns) -> AlignConfig:
    """AlignConfig from --config (either a bare table or under 'align')."""
    if not getattr(ns, "config", None):
        return AlignConfig()
    data = _load_config_file(ns.config)
    data = data.get("align", data)
    sched = data.get("schedule")
    if sched is not None:
        data = {**data, "schedule": tuple(tuple(e) for e in sched)}
    return AlignConfig(**data)


def _seed(ns) -> int:
    """--seed wins, then a config-file 'seed', then 0."""
    if ns.seed is not None:
        return ns.seed
    if getattr(ns, "config", None):
        seed = _load_config_file(ns.config).get("seed")
        if seed is not None:
            return int(seed)
    return 0


def _pipeline_config(ns, overrides: dict) -> pipeline.PipelineConfig:
    data = _load_config_file(ns.config) if getattr(ns, "config", None) else {}
    data = dict(data)
    data.setdefault("seed", 0)
    if ns.seed is not None:  # explicit --seed beats the config file
        data["seed"] = ns.seed
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return pipeline.PipelineConfig.from_dict(data)


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_texture_image(path):
    path = Path(path)
    if path.suffix == ".gim":
        return load_gim(path)
    return load_png(path, kind="texture")


def _mesh_vector(mesh: Mesh) -> np.ndarray:
    return mesh.vertices.ravel()


# ---------------------------------------------------------------- subcommands


def cmd_align(ns, log) -> int:
    template = load_obj(ns.template)
    scan = load_obj(ns.scan)
    pairs = np.asarray(_load_json(ns.landmarks), dtype=np.int64).reshape(-1, 2)
    cfg = _align_config(ns)
    tf, residual = rigid_align(scan.vertices[pairs[:, 1]], template.vertices[pairs[:, 0]])
    log("info", "align.rigid", scale=tf.scale, residual=residual)
    scan_aligned = scan.with_vertices(tf.apply(scan.vertices))
    history: list = []
    fitted = nonrigid_fit(template, scan_aligned, pairs, cfg, history=history)
    if scan.colors is not None:
        colors = np.clip(transfer_attributes(fitted.vertices, scan_aligned, scan_aligned.colors), 0.0, 1.0)
        fitted = Mesh(fitted.vertices, fitted.triangles, colors=colors, landmarks=template.landmarks)
    save_obj(fitted, ns.out)
    log("info", "align.done", iterations=len(history), energy=history[-1] if history else None, out=ns.out)
    return 0


def cmd_parametrize(ns, log) -> int:
    mesh = load_obj(ns.mesh)
    anchor = ns.anchor if ns.anchor is not None else pick_anchor(mesh)
    loop = mesh.boundary_loop(anchor)
    loop_uv, _t = boundary_embedding(mesh.vertices[loop])
    uniform = weighted_embed(mesh, uniform_weights(mesh), loop, loop_uv)
    if ns.weights == "uniform":
        pmap = uniform
    else:
        vw = np.asarray(_load_json(ns.vertex_weights), dtype=np.float64) if ns.vertex_weights else np.ones(mesh.n_vertices)
        pmap = weighted_embed(mesh, design_weights(mesh, vw, uniform), loop, loop_uv)
    if ns.symmetry:
        pmap = symmetrize(pmap, mesh, _load_json(ns.symmetry))
    pmap.save(ns.out)
    log("info", "parametrize.done", vertices=mesh.n_vertices, boundary=len(loop), weights=ns.weights, out=ns.out)
    return 0


def cmd_rasterize(ns, log) -> int:
    mesh = load_obj(ns.mesh)
    pmap = ParamMap.load(ns.map, mesh)
    out = Path(ns.out)
    if ns.kind == "texture":
        if mesh.colors is None:
            raise MeshError(f"{ns.mesh}: no vertex colors to rasterize")
        image = rasterize(mesh, pmap, mesh.colors, ns.width, kind="texture")
    else:
        norm = None
        if ns.norm != "auto":
            vals = [float(x) for x in ns.norm.split(",")]
            if len(vals) != 6:
                raise ValueError("--norm expects 'auto' or 6 comma-separated floats (min,max per axis)")
            norm = np.array(vals, dtype=np.float64).reshape(3, 2)
        image = rasterize(mesh, pmap, mesh.vertices, ns.width, kind="geometry", norm=norm)
    if out.suffix == ".gim":
        save_gim(image, out)
    elif ns.kind == "texture":
        save_png(image, out)
    else:
        raise ValueError("geometry images are float data; write them to a .gim path")
    log("info", "rasterize.done", kind=ns.kind, width=ns.width, covered=int(image.coverage.sum()), out=str(out))
    return 0


def cmd_build_model(ns, log) -> int:
    out = Path(ns.out)
    if ns.kind == "expression":
        stems_n, neutral = pipeline.load_mesh_dir(Path(ns.data) / "neutral", need_colors=False)
        stems_e, expr = pipeline.load_mesh_dir(Path(ns.data) / "expr", need_colors=False)
        if stems_n != stems_e:
            raise MeshError("neutral/ and expr/ stems do not match")
        pairs = [(_mesh_vector(e), _mesh_vector(m)) for e, m in zip(expr, neutral)]
        model = build_expression_basis(pairs, ns.k)
        save_model(model.as_linear(), out)
        log("info", "build-model.done", kind=ns.kind, k=ns.k, n=len(pairs), out=str(out))
        return 0

    _stems, meshes = pipeline.load_mesh_dir(ns.data, need_colors=ns.kind != "geometry")
    G, T = pipeline.mesh_matrices(meshes)
    if ns.kind == "texture":
        model = build_basis(T, ns.k)
        data = T
    elif ns.kind == "geometry":
        model = build_basis(G, ns.k)
        data = G
    else:
        params = estimate_ml_params(G, T, ns.k)
        save_model(params.joint.to_stacked(), out)
        np.savez(str(out) + ".aux.npz", sigma_beta=params.sigma_beta, sigma_noise=params.sigma_noise_diag)
        log("info", "build-model.done", kind="joint", k=ns.k, n=G.shape[1], out=str(out))
        return 0
    save_model(model, out)
    coeffs = model.basis.T @ (data - model.mean[:, None])
    np.save(str(out) + ".coeffs.npy", coeffs)
    log("info", "build-model.done", kind=ns.kind, k=ns.k, n=data.shape[1], out=str(out))
    return 0


def cmd_fit_geometry(ns, log) -> int:
    template = load_obj(ns.template)
    pmap = ParamMap.load(ns.map, template)
    image = _load_texture_image(ns.texture)
    texture = np.clip(sample_back(image, pmap).ravel(), 0.0, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence([_seed(ns), 0x617]))
    estimate, _ = pipeline.load_estimator(ns.models, ns.method, rng)
    geometry = estimate(texture)
    if geometry.shape != (3 * template.n_vertices,):
        raise ValueError("geometry model dimension does not match the template")
    mesh = Mesh(geometry.reshape(-1, 3), template.triangles, colors=texture.reshape(-1, 3), landmarks=template.landmarks)
    save_obj(mesh, ns.out)
    log("info", "fit-geometry.done", method=ns.method, out=ns.out)
    return 0


def cmd_eval_fit(ns, log) -> int:
    stems, meshes = pipeline.load_mesh_dir(ns.test, need_colors=True)
    G, T = pipeline.mesh_matrices(meshes)
    rng = np.random.default_rng(np.random.SeedSequence([_seed(ns), 0x617]))
    estimate, _ = pipeline.load_estimator(ns.models, ns.method, rng)
    per_sample, mean = evaluate_fit(estimate, T, G)
    lines = ["id,error"] + [f"{stem},{repr(float(e))}" for stem, e in zip(stems, per_sample)]
    text = "\n".join(lines) + "\n"
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    log("info", "eval-fit.done", method=ns.method, n=len(stems), mean_error=float(mean))
    return 0


def cmd_expression(ns, log) -> int:
    neutral = load_obj(ns.neutral)
    model = ExpressionModel.from_linear(load_model(ns.model))
    alpha = np.asarray(_load_json(ns.coeffs), dtype=np.float64) if ns.coeffs else np.zeros(model.k)
    geometry = apply_expression(_mesh_vector(neutral), alpha, model)
    out_mesh = Mesh(geometry.reshape(-1, 3), neutral.triangles, colors=neutral.colors, landmarks=neutral.landmarks)
    save_obj(out_mesh, ns.out)
    log("info", "expression.done", k=model.k, out=ns.out)
    return 0


def cmd_prep_masked(ns, log) -> int:
    from PIL import Image

    image_paths = sorted(Path(ns.images).glob("*.png"))
    if not image_paths:
        raise FileNotFoundError(f"no .png images found in {ns.images}")
    fake_dir = Path(ns.fake) if ns.fake else Path(ns.images)
    reals, fakes, masks = [], [], []
    for p in image_paths:
        mask_path = Path(ns.masks) / p.name
        if not mask_path.exists():
            raise FileNotFoundError(f"missing mask for {p.name}: {mask_path}")
        fake_path = fake_dir / p.name
        if not fake_path.exists():
            raise FileNotFoundError(f"missing fake image for {p.name}: {fake_path}")
        reals.append(np.asarray(Image.open(p).convert("RGB")))
        fakes.append(np.asarray(Image.open(fake_path).convert("RGB")))
        masks.append(load_mask_png(mask_path))
    batch = assemble_batch(reals, fakes, masks)
    export_batch(batch, ns.out, prefix="batch")
    log("info", "prep-masked.done", batch=list(batch.real.shape), out=ns.out)
    return 0


def cmd_synth_shapes(ns, log) -> int:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = synth_shapes_dataset(ns.n, size=ns.size, rng=_seed(ns))
    from PIL import Image

    artifacts = []
    for i, (img, mask) in enumerate(dataset):
        img_path = out / f"img_{i:05d}.png"
        mask_path = out / f"img_{i:05d}.mask.png"
        Image.fromarray(img).save(img_path)
        save_mask_png(mask, mask_path)
        artifacts.extend([img_path, mask_path])
    pipeline.write_manifest(out, {"seed": _seed(ns), "n": ns.n, "size": ns.size}, artifacts)
    log("info", "synth-shapes.done", n=ns.n, size=ns.size, out=str(out))
    return 0


def _load_image_dir(path) -> list:
    from PIL import Image

    paths = sorted(Path(path).glob("*.png")) + sorted(Path(path).glob("*.gim"))
    if not paths:
        raise FileNotFoundError(f"no .png or .gim images found in {path}")
    images = []
    for p in paths:
        if p.suffix == ".gim":
            images.append(load_gim(p).data.astype(np.float64))
        else:
            images.append(np.asarray(Image.open(p).convert("RGB")).astype(np.float64) / 255.0)
    return images


def cmd_eval_swd(ns, log) -> int:
    set_a = _load_image_dir(ns.set_a)
    set_b = _load_image_dir(ns.set_b)
    patches_a = laplacian_pyramid_patches(set_a, ns.levels, patches_per_image=ns.patches_per_image, rng=_seed(ns))
    patches_b = laplacian_pyramid_patches(set_b, ns.levels, patches_per_image=ns.patches_per_image, rng=_seed(ns) + 1)
    raw = [swd(a, b, n_projections=ns.projections, rng=_seed(ns) + 2 + i) for i, (a, b) in enumerate(zip(patches_a, patches_b))]
    report = {
        "levels": ns.levels,
        "n_images": [len(set_a), len(set_b)],
        "n_projections": ns.projections,
        "seed": _seed(ns),
        "swd": raw,
        "swd_x1e3": [v * 1e3 for v in raw],
    }
    for level, value in enumerate(report["swd_x1e3"]):
        sys.stdout.write(f"level {level}: swd x1e3 = {value:.6g}\n")
    if ns.json:
        with open(ns.json, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    log("info", "eval-swd.done", swd_x1e3=report["swd_x1e3"])
    return 0


def cmd_prepare(ns, log) -> int:
    config = _pipeline_config(
        ns,
        {
            "template": ns.template,
            "scans": ns.scans,
            "out": ns.out,
            "width": ns.width,
            "workers": ns.workers,
            "weight_preset": ns.weights,
            "vertex_weights": ns.vertex_weights,
            "symmetry": ns.symmetry,
            "masks": ns.masks,
            "anchor": ns.anchor,
            "augment_textures": False if ns.no_augment else None,
            "augment_geometry": False if ns.no_augment else None,
        },
    )
    manifest = pipeline.cmd_prepare(config, log=log)
    if manifest["failures"]:
        log("warning", "prepare.failures", failures=manifest["failures"])
    return 0


def cmd_synth_face(ns, log) -> int:
    config = _pipeline_config(
        ns,
        {
            "models": ns.models,
            "template": ns.template,
            "map_path": ns.map,
            "out": ns.out,
            "width": ns.width,
            "estimator": ns.estimator,
            "expression_model": ns.expression,
        },
    )
    texture_source = _load_texture_image(ns.texture) if ns.texture else None
    expr_coeffs = np.asarray(_load_json(ns.expr_coeffs), dtype=np.float64) if ns.expr_coeffs else None
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5F5]))
    pipeline.cmd_synth_face(config, texture_source, rng, expr_coeffs=expr_coeffs, expr_sample=ns.expr_sample, log=log)
    return 0


def cmd_synth_population(ns, log) -> int:
    from .synthetic import SyntheticFaceSpec, make_synthetic_population

    spec = SyntheticFaceSpec(
        grid_n=ns.grid_n,
        n_modes=ns.modes,
        n_samples=ns.n,
        texture_noise=ns.texture_noise,
        texture_noise_modes=ns.noise_modes,
    )
    pop = make_synthetic_population(spec, seed=_seed(ns))
    out = Path(ns.out)
    (out / "neutral").mkdir(parents=True, exist_ok=True)
    if ns.with_expression:
        (out / "expr").mkdir(exist_ok=True)
    artifacts = []

    def save_mesh(mesh, path):
        save_obj(mesh, path)
        artifacts.append(path)
        artifacts.append(Path(str(path) + ".landmarks.json"))

    save_mesh(pop.template, out / "template.obj")
    for i in range(pop.n_samples):
        save_mesh(pop.sample_mesh(i), out / "neutral" / f"s{i:04d}.obj")
        if ns.with_expression:
            save_mesh(pop.sample_mesh(i, with_expression=True), out / "expr" / f"s{i:04d}.obj")
    payload = {"seed": _seed(ns), "n": pop.n_samples, "grid_n": ns.grid_n, "modes": ns.modes}
    pipeline.write_manifest(out, payload, artifacts)
    log("info", "synth-population.done", n=pop.n_samples, out=str(out))
    return 0


# ------------------------------------------------------------------- parsing


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global RNG seed (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML or JSON config file")
    common.add_argument("--quiet", action="store_const", const=True, default=argparse.SUPPRESS, help="only warnings and errors")

    parser = _Parser(prog="facegeom", description="Facial texture/geometry dataset and synthesis tools.")
    parser.add_argument("--version", action="version", version=f"facegeom {__version__}")
    parser.set_defaults(seed=None, config=None, quiet=False)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("align", parents=[common], help="register a template mesh to a scan")
    p.add_argument("--template", required=True)
    p.add_argument("--scan", required=True)
    p.add_argument("--landmarks", required=True, help="JSON array of [template_index, scan_index] pairs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("parametrize", parents=[common], help="embed a disk mesh into the unit square")
    p.add_argument("--mesh", required=True)
    p.add_argument("--weights", choices=("uniform", "design"), default="uniform")
    p.add_argument("--vertex-weights", help="JSON array of per-vertex weights (design preset)")
    p.add_argument("--symmetry", help="JSON array of [left, right] vertex pairs to enforce")
    p.add_argument("--anchor", type=int, help="boundary vertex starting the loop (default: bottom-center of the rim)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parametrize)

    p = sub.add_parser("rasterize", parents=[common], help="render per-vertex attributes through a map")
    p.add_argument("--mesh", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--kind", choices=("texture", "geometry"), default="texture")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--norm", default="auto", help="geometry normalization: 'auto' or 6 floats xmin,xmax,ymin,ymax,zmin,zmax")
    p.add_argument("--out", required=True, help=".png for textures, .gim for float data")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("build-model", parents=[common], help="train a linear basis from registered meshes")
    p.add_argument("--data", required=True, help="directory of same-connectivity .obj meshes")
    p.add_argument("--kind", choices=("texture", "geometry", "joint", "expression"), required=True)
    p.add_argument("-k", type=int, required=True, help="number of basis vectors")
    p.add_argument("--out", required=True, help="model file; training coefficients land in <out>.coeffs.npy")
    p.set_defaults(func=cmd_build_model)

    p = sub.add_parser("fit-geometry", parents=[common], help="estimate geometry for a texture image")
    p.add_argument("--method", choices=pipeline.ESTIMATORS, default="ls")
    p.add_argument("--texture", required=True, help="texture image (.png or .gim)")
    p.add_argument("--models", required=True, help="directory with texture.fgm / geometry.fgm / joint.fgm")
    p.add_argument("--template", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_geometry)

    p = sub.add_parser("eval-fit", parents=[common], help="per-sample estimator errors on a test set")
    p.add_argument("--method", choices=pipeline.ESTIMATORS, default="ls")
    p.add_argument("--models", required=True)
    p.add_argument("--test", required=True, help="directory of colored .obj meshes")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_eval_fit)

    p = sub.add_parser("expression", parents=[common], help="apply an expression model to a neutral mesh")
    p.add_argument("--neutral", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--coeffs", help="JSON array of expression coefficients (default: zeros)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expression)

    p = sub.add_parser("prep-masked", parents=[common], help="assemble masked real/fake training batches")
    p.add_argument("--images", required=True, help="directory of real .png images")
    p.add_argument("--masks", required=True, help="directory of same-name validity masks")
    p.add_argument("--fake", help="directory of fake images (default: the real images)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prep_masked)

    p = sub.add_parser("synth-shapes", parents=[common], help="random-shapes dataset with corruption masks")
    p.add_argument("-n", type=int, default=10000)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_shapes)

    p = sub.add_parser("eval-swd", parents=[common], help="sliced Wasserstein distance between image sets")
    p.add_argument("--set-a", required=True)
    p.add_argument("--set-b", required=True)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--projections", type=int, default=512)
    p.add_argument("--patches-per-image", type=int, default=128)
    p.add_argument("--json", help="write the full report here")
    p.set_defaults(func=cmd_eval_swd)

    p = sub.add_parser("prepare", parents=[common], help="scans -> aligned meshes + texture/geometry images")
    p.add_argument("--template")
    p.add_argument("--scans")
    p.add_argument("--out")
    p.add_argument("--width", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--weights", choices=("uniform", "design"))
    p.add_argument("--vertex-weights")
    p.add_argument("--symmetry")
    p.add_argument("--masks", help="directory of <scan>.png validity masks")
    p.add_argument("--anchor", type=int, help="boundary vertex starting the loop (default: bottom-center of the rim)")
    p.add_argument("--no-augment", action="store_true", help="disable texture and geometry augmentation")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth-face", parents=[common], help="sample or lift a texture and synthesize a face")
    p.add_argument("--models")
    p.add_argument("--template")
    p.add_argument("--map")
    p.add_argument("--out")
    p.add_argument("--width", type=int)
    p.add_argument("--estimator", choices=pipeline.ESTIMATORS)
    p.add_argument("--texture", help="texture image to lift (default: sample the texture model)")
    p.add_argument("--expression", help="expression model file")
    p.add_argument("--expr-coeffs", help="JSON array of expression coefficients")
    p.add_argument("--expr-sample", action="store_true", help="sample expression coefficients from the prior")
    p.set_defaults(func=cmd_synth_face)

    p = sub.add_parser("synth-population", parents=[common], help="coupled synthetic scan population (demo data)")
    p.add_argument("-n", type=int, default=200)
    p.add_argument("--grid-n", type=int, default=40)
    p.add_argument("--modes", type=int, default=20)
    p.add_argument("--texture-noise", type=float, default=0.0)
    p.add_argument("--noise-modes", type=int, default=0)
    p.add_argument("--with-expression", action="store_true", help="also write expressive variants under expr/")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_population)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(ns, "func"):
        parser.print_help(sys.stderr)
        return 1
    log = JsonLogger("warning" if ns.quiet else "info")
    try:
        return ns.func(ns, log)
    except (SolveError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log("error", "numerical_failure", error=str(exc), type=type(exc).__name__)
        return 3
    except (MeshError, ValueError, KeyError, OSError, struct.error) as exc:
        log("error", "data_error", error=str(exc), type=type(exc).__name__)
        return 2


if __name__ == "__main__":
    sys.exit(main())
