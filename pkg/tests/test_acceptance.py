"""Release acceptance suite: ten gate criteria, one test and one line each.

Every test prints `criterion NN (<label>): PASS|FAIL`. Thresholds here are
release gates; loosening them requires a decision record, not an edit.
"""
import dataclasses
import json
import os
import time

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from facegeom import (
    AlignConfig,
    EdgeWeights,
    JointModel,
    ValidMask,
    assemble_batch,
    augment_geometry,
    augment_texture,
    boundary_embedding,
    build_basis,
    canonical_correlation,
    fit_energy,
    fit_ls,
    fit_ml,
    fit_nearest,
    fit_random,
    flipped_triangles,
    nonrigid_fit,
    pick_anchor,
    rasterize,
    reconstruct,
    rigid_align,
    sample_back,
    sample_coefficients,
    train_ls,
    uniform_weights,
    weighted_embed,
)
from facegeom.align import energy_gradient, total_energy
from facegeom.cli import main
from facegeom.eval_metrics import PatchSet, swd
from facegeom.geo_fit import MlParams, estimate_ml_params, evaluate_fit
from facegeom.masked_batch import RED, synth_shapes_dataset
from facegeom.synthetic import (
    SyntheticFaceSpec,
    landmark_grid_indices,
    make_disk_mesh,
    make_grid_mesh,
    make_synthetic_population,
    oracle_map_solution,
)


def report(n: int, label: str, checks):
    failed = [name for name, ok in checks if not ok]
    line = f"criterion {n:02d} ({label}): {'FAIL ' + str(failed) if failed else 'PASS'}"
    print(line)
    assert not failed, line


def batch_project(data, model):
    return model.basis.T @ (data - model.mean[:, None])


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def perturbed_grid(n, rng):
    cell = 1.0 / (n - 1)
    heights = 0.15 * np.sin(2 * np.pi * rng.random()) * np.ones(n * n)
    mesh = make_grid_mesh(n, heights=0.1 * rng.standard_normal() * heights)
    v = mesh.vertices.copy()
    interior = np.setdiff1d(np.arange(n * n), np.unique(mesh.boundary_edges))
    v[interior, :2] += rng.uniform(-0.15, 0.15, (len(interior), 2)) * cell
    v[interior, 2] += 0.05 * rng.standard_normal(len(interior))
    return mesh.with_vertices(v)


def embed_with_random_weights(mesh, rng):
    base = uniform_weights(mesh)
    weights = EdgeWeights(base.edges, rng.uniform(0.1, 10.0, len(base.values)))
    loop = mesh.boundary_loop(pick_anchor(mesh))
    loop_uv, _ = boundary_embedding(mesh.vertices[loop])
    return weighted_embed(mesh, weights, loop, loop_uv), weights, loop, loop_uv


def interior_residual_inf(mesh, weights, uv):
    n = mesh.n_vertices
    e, w = weights.edges, weights.values
    W = sp.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    row = np.asarray(W.sum(axis=1)).ravel()
    res = uv - sp.diags(1.0 / row) @ W @ uv
    interior = np.setdiff1d(np.arange(n), np.unique(mesh.boundary_edges))
    return float(np.abs(res[interior]).max())


def test_criterion_01_parametrization_validity():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    meshes = [perturbed_grid(n, rng) for n in (10, 14, 18, 22, 26, 30, 34, 40, 46, 50)]
    meshes += [make_disk_mesh(k, seed=s) for s, k in enumerate((150, 300, 500, 700, 900, 1200, 1500, 1800, 2100, 2300))]
    assert len(meshes) == 20 and max(m.n_vertices for m in meshes) <= 2500

    worst_res, worst_oracle, n_flipped = 0.0, 0.0, 0
    for mesh in meshes:
        pm, weights, loop, loop_uv = embed_with_random_weights(mesh, rng)
        n_flipped += len(flipped_triangles(mesh, pm.uv))
        worst_res = max(worst_res, interior_residual_inf(mesh, weights, pm.uv))
        dense = oracle_map_solution(mesh, weights, loop, loop_uv)
        worst_oracle = max(worst_oracle, float(np.abs(pm.uv - dense).max()))
    elapsed = time.perf_counter() - start

    report(1, "parametrization validity", [
        ("no flipped triangles", n_flipped == 0),
        ("residual inf-norm < 1e-8", worst_res < 1e-8),
        ("matches dense oracle < 1e-8", worst_oracle < 1e-8),
        ("runtime < 30 s", elapsed < 30.0),
    ])


def test_criterion_02_pca_exactness_and_prior():
    pop = make_synthetic_population(SyntheticFaceSpec(grid_n=20, n_modes=10, n_samples=80), seed=0)
    model = build_basis(pop.geometries, 10)  # centered data has rank n_modes
    recon = model.mean[:, None] + model.basis @ batch_project(pop.geometries, model)
    rel = np.linalg.norm(recon - pop.geometries) / np.linalg.norm(pop.geometries)

    rng = np.random.default_rng(7)
    draws = np.stack([sample_coefficients(model, rng) for _ in range(100_000)])
    want_var = model.singular_values**2 / model.n_train
    var_rel = np.abs(draws.var(axis=0) - want_var) / want_var

    report(2, "model construction", [
        ("full-rank reconstruction < 1e-6", rel < 1e-6),
        ("singular values strictly descending", bool(np.all(np.diff(model.singular_values) < 0))),
        ("prior variance within 5% over 1e5 draws", bool(var_rel.max() < 0.05)),
    ])


def test_criterion_03_estimator_correctness():
    rng = np.random.default_rng(1)
    A_t = rng.standard_normal((6, 40))
    A_g = rng.standard_normal((8, 40))
    W = train_ls(A_t, A_g).W
    W_normal = np.linalg.solve(A_t @ A_t.T, A_t @ A_g.T)
    ls_ok = np.abs(W - W_normal).max() < 1e-8

    k, half = 20, 30
    worst = 0.0
    for _ in range(50):
        stacked, _ = np.linalg.qr(rng.standard_normal((2 * half, k)))
        mean_g, mean_t = rng.standard_normal(half), rng.standard_normal(half)
        joint = JointModel(mean_g, mean_t, stacked[:half], stacked[half:], np.sort(rng.uniform(1, 3, k))[::-1], 40)
        raw = rng.standard_normal((k, k))
        sigma_beta = 0.5 * (raw @ raw.T + (raw @ raw.T).T) / k + np.eye(k)
        noise = rng.uniform(0.05, 0.5, half)
        params = MlParams(joint, sigma_beta, noise)
        t = mean_t + joint.basis_t @ rng.standard_normal(k) + np.sqrt(noise) * rng.standard_normal(half)

        s_inv = 1.0 / noise
        sb_inv = np.linalg.inv(sigma_beta)

        def objective(b):
            r = t - mean_t - joint.basis_t @ b
            return 0.5 * (r * s_inv) @ r + 0.5 * b @ sb_inv @ b

        def grad(b):
            return -joint.basis_t.T @ (s_inv * (t - mean_t - joint.basis_t @ b)) + sb_inv @ b

        hess = joint.basis_t.T @ (s_inv[:, None] * joint.basis_t) + sb_inv
        opt = scipy.optimize.minimize(objective, np.zeros(k), jac=grad, hess=lambda b: hess,
                                      method="trust-exact", options={"gtol": 1e-13})
        beta_map = opt.x
        g = fit_ml(t, params)
        beta_fit, *_ = np.linalg.lstsq(joint.basis_g, g - mean_g, rcond=None)
        worst = max(worst, float(np.linalg.norm(beta_fit - beta_map) / np.linalg.norm(beta_map)))

    report(3, "estimator correctness", [
        ("LS map matches normal equations < 1e-8", ls_ok),
        ("MAP solution matches numerical minimizer < 1e-6 rel", worst < 1e-6),
    ])


def test_criterion_04_method_ordering():
    spec = SyntheticFaceSpec(texture_noise=0.005, texture_noise_modes=8)
    k = 20
    start = time.perf_counter()
    orderings = []
    for seed in range(5):
        train = make_synthetic_population(spec, seed=seed)
        test = make_synthetic_population(dataclasses.replace(spec, n_samples=64), seed=seed + 1000)

        tex_m = build_basis(train.textures, k)
        geo_m = build_basis(train.geometries, k)
        A_t = batch_project(train.textures, tex_m)
        A_g = batch_project(train.geometries, geo_m)
        ls = train_ls(A_t, A_g, tex_m, geo_m)
        ml = estimate_ml_params(train.geometries, train.textures, k)
        rng = np.random.default_rng(seed)

        errors = {}
        for name, est in (
            ("ls", lambda t: fit_ls(t, ls)),
            ("ml", lambda t: fit_ml(t, ml)),
            ("nn", lambda t: fit_nearest(t, A_t, A_g, tex_m, geo_m)),
            ("random", lambda t: fit_random(geo_m, rng)),
        ):
            errors[name] = evaluate_fit(est, test.textures, test.geometries)[1]
        orderings.append(errors["ls"] <= errors["ml"] <= errors["random"] and errors["ls"] <= errors["nn"])
    elapsed = time.perf_counter() - start

    report(4, "estimator ordering", [
        ("LS <= ML <= Random and LS <= NN on all 5 seeds", all(orderings)),
        ("runtime < 60 s", elapsed < 60.0),
    ])


def test_criterion_05_masked_batch_protocol():
    rng = np.random.default_rng(2)
    channel_ok, zero_ok = True, True
    for _ in range(100):
        b = int(rng.integers(1, 7))
        hw = int(rng.choice([8, 16]))
        real = rng.integers(0, 256, size=(b, hw, hw, 3), dtype=np.uint8)
        fake = rng.integers(0, 256, size=(b, hw, hw, 3), dtype=np.uint8)
        masks = [ValidMask((rng.random((hw, hw)) > 0.4).astype(np.uint8)) for _ in range(b)]
        batch = assemble_batch(real, fake, masks)
        channel_ok &= batch.real[:, 3].tobytes() == batch.fake[:, 3].tobytes()
        off = batch.real[:, 3:] == 0.0
        zero_ok &= bool(np.all(batch.real[:, :3][np.broadcast_to(off, batch.real[:, :3].shape)] == 0.0))
        zero_ok &= bool(np.all(batch.fake[:, :3][np.broadcast_to(off, batch.fake[:, :3].shape)] == 0.0))

    n_images = 10_000 if os.environ.get("FACEGEOM_FULL_SHAPES") else 1000
    red = np.array(RED, dtype=np.uint8)
    masks_exact = True
    for img, mask in synth_shapes_dataset(n_images, size=256, rng=0):
        masks_exact &= bool(np.array_equal(mask.data == 0, np.all(img == red, axis=2)))

    report(5, "masked-batch protocol", [
        ("mask channels bit-identical over 100 batches", channel_ok),
        ("masked RGB exactly zero", zero_ok),
        (f"shapes masks cover exactly red pixels (n={n_images})", masks_exact),
    ])


def test_criterion_06_swd_sanity():
    rng = np.random.default_rng(3)
    a = PatchSet(rng.standard_normal((300, 6)), 0)
    self_zero = swd(a, a, rng=1) == 0.0

    base = np.array([[0.0], [1.0]])
    c = 0.73
    shift_err = abs(swd(PatchSet(base, 0), PatchSet(base + c, 0), n_projections=32, rng=2) - c)

    mu = 2.0
    x = rng.standard_normal((10_000, 2))
    y = rng.standard_normal((10_000, 2)) + np.array([mu, 0.0])
    got = swd(PatchSet(x, 0), PatchSet(y, 0), n_projections=512, rng=3)
    # periodic rectangle rule for E_phi |mu cos(phi)|, spectrally accurate
    phi = np.arange(20000) * (2.0 * np.pi / 20000)
    oracle = float(np.mean(np.abs(mu * np.cos(phi))))
    gauss_ok = abs(got - oracle) / oracle < 0.05

    mono = []
    for seed in range(10):
        r = np.random.default_rng(100 + seed)
        ref = PatchSet(r.standard_normal((256, 8)), 0)
        d = [swd(ref, PatchSet(ref.descriptors + s * r.standard_normal(ref.descriptors.shape), 0), rng=seed)
             for s in (0.1, 0.4, 1.0)]
        mono.append(d[0] < d[1] < d[2])

    report(6, "sliced Wasserstein sanity", [
        ("swd(A, A) == 0", self_zero),
        ("1-D shift recovered within 1e-6", shift_err < 1e-6),
        ("2-D Gaussian matches quadrature oracle within 5%", gauss_ok),
        ("noise monotonicity on 10 seeds", all(mono)),
    ])


def test_criterion_07_roundtrip_fidelity():
    pop = make_synthetic_population(SyntheticFaceSpec(n_samples=4), seed=0)
    template = pop.template
    loop = template.boundary_loop(pick_anchor(template))
    loop_uv, _ = boundary_embedding(template.vertices[loop])
    pmap = weighted_embed(template, uniform_weights(template), loop, loop_uv)
    rim = np.unique(template.boundary_edges)
    interior = np.setdiff1d(np.arange(template.n_vertices), rim)

    max_rel = 0.0
    for i in range(3):
        mesh = pop.sample_mesh(i)
        img = rasterize(mesh, pmap, mesh.vertices, 1024, kind="geometry")
        back = sample_back(img, pmap)
        diag = float(np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))
        err = np.linalg.norm(back[interior] - mesh.vertices[interior], axis=1).max()
        max_rel = max(max_rel, err / diag)

    mesh = pop.sample_mesh(0)
    tex = rasterize(mesh, pmap, np.clip(mesh.colors, 0, 1), 1024, kind="texture")
    flip_ok = np.array_equal(augment_texture(augment_texture(tex)[1])[1].data, tex.data)
    geo = rasterize(mesh, pmap, mesh.vertices, 1024, kind="geometry")
    once = augment_geometry(geo)[1]
    C = float(geo.norm[0, 1])
    mirror_ok = np.array_equal(augment_geometry(once, C=C)[1].data, geo.data)

    report(7, "round-trip fidelity", [
        ("interior error < 1e-3 x bbox diagonal at W=1024", max_rel < 1e-3),
        ("double texture flip bit-exact", flip_ok),
        ("double X-mirror bit-exact", mirror_ok),
    ])


def test_criterion_08_alignment():
    rng = np.random.default_rng(4)
    rigid_ok = True
    for _ in range(20):
        src = rng.standard_normal((12, 3))
        rot = random_rotation(rng)
        scale = float(rng.uniform(0.3, 3.0))
        t = rng.standard_normal(3)
        tf, residual = rigid_align(src, scale * src @ rot.T + t)
        rigid_ok &= bool(np.abs(tf.apply(src) - (scale * src @ rot.T + t)).max() < 1e-8 and residual < 1e-8)

    n = 7  # 49 vertices
    mesh = make_grid_mesh(n, heights=0.1 * rng.standard_normal(n * n))
    scan = make_grid_mesh(n, heights=0.1 * rng.standard_normal(n * n))
    template = mesh.with_vertices(mesh.vertices + 0.05 * rng.standard_normal((n * n, 3)))
    pairs = np.array([[0, 0], [n * n // 2, n * n // 2], [n * n - 1, n * n - 1]])
    config = AlignConfig(landmark_weight=0.7, surface_weight=1.3, smooth_weight=0.4)
    grad = energy_gradient(template, scan, pairs, config, base_vertices=mesh.vertices)
    h = 1e-6
    num = np.zeros_like(grad)
    for i in range(template.n_vertices):
        for d in range(3):
            vp, vm = template.vertices.copy(), template.vertices.copy()
            vp[i, d] += h
            vm[i, d] -= h
            num[i, d] = (
                total_energy(template.with_vertices(vp), scan, pairs, config, base_vertices=mesh.vertices)
                - total_energy(template.with_vertices(vm), scan, pairs, config, base_vertices=mesh.vertices)
            ) / (2 * h)
    grad_ok = np.abs(grad - num).max() / max(np.abs(num).max(), 1.0) < 1e-5

    m = 12
    gx, gy = np.meshgrid(np.linspace(0, 1, m), np.linspace(0, 1, m))
    scan_b = make_grid_mesh(m, heights=(0.2 * np.sin(np.pi * gx) * np.sin(np.pi * gy)).ravel())
    template_b = make_grid_mesh(m)
    lm = landmark_grid_indices(m)
    pairs_b = np.column_stack([lm, lm])
    cfg = AlignConfig(max_iters=200, step_size=0.05, smooth_weight=0.1)
    history = []
    fitted = nonrigid_fit(template_b, scan_b, pairs_b, cfg, history=history)
    nonincreasing = bool(np.all(np.diff(history) <= 1e-12))
    e0 = fit_energy(template_b, scan_b, pairs_b)[1]
    e1 = fit_energy(fitted, scan_b, pairs_b)[1]

    report(8, "alignment", [
        ("rigid recovery < 1e-8 on 20 transforms", rigid_ok),
        ("gradient matches central differences < 1e-5 rel", bool(grad_ok)),
        ("energy non-increasing", nonincreasing),
        ("bulged-scan surface error reduced > 99%", e1 < 0.01 * e0),
    ])


def test_criterion_09_cca():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((400, 6))
    corr_self, _, _ = canonical_correlation(X, X.copy(), d=6)
    self_ok = bool(np.abs(corr_self - 1.0).max() < 1e-8)

    A = rng.standard_normal((10_000, 5))
    B = rng.standard_normal((10_000, 5))
    corr_ind, _, _ = canonical_correlation(A, B, d=1)
    ind_ok = corr_ind[0] < 0.05

    pop = make_synthetic_population(SyntheticFaceSpec(), seed=0)  # noise-free
    tex_m = build_basis(pop.textures, 20)
    geo_m = build_basis(pop.geometries, 20)
    A_t = batch_project(pop.textures, tex_m).T
    A_g = batch_project(pop.geometries, geo_m).T
    corr_pop, _, _ = canonical_correlation(A_t, A_g, d=1)

    report(9, "canonical correlation", [
        ("identical sets give 1 within 1e-8", self_ok),
        ("independent sets give first correlation < 0.05", bool(ind_ok)),
        ("texture/geometry coefficients correlate > 0.99", bool(corr_pop[0] > 0.99)),
    ])


def test_criterion_10_determinism(tmp_path):
    pop = tmp_path / "pop"
    assert main(["synth-population", "-n", "8", "--grid-n", "10", "--modes", "4",
                 "--out", str(pop), "--quiet"]) == 0

    prep_args = ["prepare", "--template", str(pop / "template.obj"), "--scans", str(pop / "neutral"),
                 "--width", "32", "--workers", "2", "--seed", "0", "--quiet"]
    for out in (tmp_path / "p1", tmp_path / "p2"):
        assert main(prep_args + ["--out", str(out)]) == 0
    p1 = json.loads((tmp_path / "p1" / "manifest.json").read_text())
    p2 = json.loads((tmp_path / "p2" / "manifest.json").read_text())
    prepare_ok = p1["artifacts"] == p2["artifacts"] and len(p1["artifacts"]) > 0 and not p1["failures"]

    models = tmp_path / "models"
    models.mkdir()
    for kind in ("texture", "geometry"):
        assert main(["build-model", "--data", str(tmp_path / "p1" / "meshes"), "--kind", kind,
                     "-k", "4", "--out", str(models / f"{kind}.fgm"), "--quiet"]) == 0
    face_args = ["synth-face", "--models", str(models), "--template", str(pop / "template.obj"),
                 "--map", str(tmp_path / "p1" / "map.uv.json"), "--width", "32", "--seed", "11", "--quiet"]
    for out in (tmp_path / "f1", tmp_path / "f2"):
        assert main(face_args + ["--out", str(out)]) == 0
    f1 = json.loads((tmp_path / "f1" / "manifest.json").read_text())
    f2 = json.loads((tmp_path / "f2" / "manifest.json").read_text())
    face_ok = f1["artifacts"] == f2["artifacts"] and len(f1["artifacts"]) > 0

    report(10, "determinism", [
        ("prepare re-run artifact hashes identical", prepare_ok),
        ("synth-face re-run artifact hashes identical", face_ok),
    ])
