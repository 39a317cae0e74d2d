"""Distribution-distance metrics: pyramid patches, SWD, CCA, NN distances."""
import numpy as np
import pytest

from facegeom import (
    Descriptor,
    PatchSet,
    canonical_correlation,
    histogram_summary,
    laplacian_pyramid,
    laplacian_pyramid_patches,
    load_descriptors,
    nn_distances,
    save_descriptors,
    swd,
)


def noise_images(n, width, rng, sigma=0.0):
    base = rng.random((width, width, 3))
    return [base + sigma * rng.standard_normal((width, width, 3)) for _ in range(n)]


def test_pyramid_structure_and_reconstruction():
    rng = np.random.default_rng(0)
    img = rng.random((64, 64, 3))
    bands = laplacian_pyramid(img, 3)
    assert [b.shape[0] for b in bands] == [64, 32, 16]
    # collapsing the pyramid reproduces the image exactly: each band
    # stores img - up(down(img)) and the residual stores down(img)
    from facegeom.eval_metrics import _up

    recon = bands[-1]
    for band in bands[-2::-1]:
        recon = band + _up(recon)
    assert np.allclose(recon, img, atol=1e-12)


def test_patch_descriptors_normalized():
    rng = np.random.default_rng(1)
    images = noise_images(3, 64, rng)
    sets = laplacian_pyramid_patches(images, levels=2, patches_per_image=16, rng=5)
    assert len(sets) == 2
    for lvl, ps in enumerate(sets):
        assert ps.level == lvl
        assert ps.descriptors.shape == (3 * 16, 7 * 7 * 3)
        per_chan = ps.descriptors.reshape(-1, 49, 3)
        means = per_chan.mean(axis=1)
        stds = per_chan.std(axis=1)
        assert np.all(np.abs(means) < 1e-10)
        # flat patches keep std below 1 through the 1e-8 floor; others hit 1
        assert np.all(stds <= 1.0 + 1e-9)
        assert np.any(np.abs(stds - 1.0) < 1e-9)


def test_patch_extraction_validation():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError, match="no images"):
        laplacian_pyramid_patches([], levels=1)
    with pytest.raises(ValueError, match="one shape"):
        laplacian_pyramid_patches([rng.random((32, 32, 3)), rng.random((64, 64, 3))], levels=1)
    with pytest.raises(ValueError, match="square"):
        laplacian_pyramid_patches([rng.random((32, 64, 3))], levels=1)
    with pytest.raises(ValueError, match="power of two"):
        laplacian_pyramid_patches([rng.random((48, 48, 3))], levels=1)
    with pytest.raises(ValueError, match=">= 64"):
        laplacian_pyramid_patches([rng.random((32, 32, 3))], levels=2)


def test_swd_identity_symmetry_determinism():
    rng = np.random.default_rng(3)
    a = PatchSet(rng.standard_normal((200, 10)), 0)
    b = PatchSet(rng.standard_normal((150, 10)), 0)
    assert swd(a, a, rng=7) == 0.0
    assert swd(a, b, rng=7) == swd(b, a, rng=7)
    assert swd(a, b, rng=7) == swd(a, b, rng=7)
    assert swd(a, b, rng=7) > 0.0
    with pytest.raises(ValueError, match="dimensions differ"):
        swd(a, PatchSet(rng.standard_normal((50, 4)), 0))


def test_swd_shift_oracle_1d():
    # point masses shifted by c: every projection contributes |theta c|
    # and in 1-D theta = +-1, so swd equals |c| exactly
    rng = np.random.default_rng(4)
    base = np.sort(rng.standard_normal(500))[:, None]
    for c in (0.25, -1.5):
        d = swd(PatchSet(base, 0), PatchSet(base + c, 0), n_projections=64, rng=1)
        assert abs(d - abs(c)) < 1e-6


def test_swd_unequal_sizes_exact():
    # analytic check with unequal N: uniform atoms {0,1} vs {0,1,2}.
    # |Qa - Qb| is 1 on [1/3,1/2) and [2/3,1]: W1 = 1/6 + 1/3 = 1/2
    a = PatchSet(np.array([[0.0], [1.0]]), 0)
    b = PatchSet(np.array([[0.0], [1.0], [2.0]]), 0)
    d = swd(a, b, n_projections=8, rng=0)
    assert abs(d - 0.5) < 1e-12


def test_swd_noise_monotone():
    rng = np.random.default_rng(5)
    ref = PatchSet(rng.standard_normal((400, 8)), 0)
    prev = 0.0
    for sigma in (0.1, 0.4, 1.0):
        noisy = PatchSet(ref.descriptors + sigma * rng.standard_normal(ref.descriptors.shape), 0)
        cur = swd(ref, noisy, rng=2)
        assert cur > prev
        prev = cur


def test_cca_identical_and_independent():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((500, 5))
    corr, u, v = canonical_correlation(X, X.copy(), d=5)
    assert np.all(np.abs(corr - 1.0) < 1e-8)
    assert np.allclose(u, v, atol=1e-8)

    Y = rng.standard_normal((10000, 5))
    X2 = rng.standard_normal((10000, 5))
    corr2, _, _ = canonical_correlation(X2, Y, d=3)
    assert np.all(np.diff(corr2) <= 1e-12)
    assert corr2[0] < 0.05


def test_cca_known_linear_map():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((800, 4))
    M = rng.standard_normal((4, 3))
    Y = X @ M + 0.01 * rng.standard_normal((800, 3))
    corr, u, v = canonical_correlation(X, Y, d=3)
    assert corr[0] > 0.999
    # leading canonical variables are maximally correlated projections
    r = np.corrcoef(u, v)[0, 1]
    assert abs(r - corr[0]) < 1e-6


def test_cca_validation_and_ridge_warning():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((50, 3))
    with pytest.raises(ValueError, match="must be \\(n, p\\)"):
        canonical_correlation(X, rng.standard_normal((49, 3)), d=1)
    with pytest.raises(ValueError, match="n > max"):
        canonical_correlation(rng.standard_normal((3, 5)), rng.standard_normal((3, 2)), d=1)
    with pytest.raises(ValueError, match="d must be"):
        canonical_correlation(X, X, d=4)
    dup = np.repeat(X[:, :1], 3, axis=1)  # rank-1 covariance
    with pytest.warns(RuntimeWarning, match="ridge"):
        canonical_correlation(dup, rng.standard_normal((50, 2)), d=1)


def test_nn_distances_matches_brute_force():
    rng = np.random.default_rng(9)
    q = rng.standard_normal((37, 6))
    r = rng.standard_normal((53, 6))
    got = nn_distances(q, r, chunk=8)
    want = np.array([min(np.sum((qi - rj) ** 2) for rj in r) for qi in q])
    assert np.array_equal(got, np.sqrt(want))
    # a query inside the reference set is at distance zero
    assert nn_distances(r[:4], r)[0] == 0.0


def test_nn_distances_descriptor_inputs_and_validation():
    rng = np.random.default_rng(10)
    ref = [Descriptor(rng.standard_normal(4), f"r{i}") for i in range(5)]
    qry = [Descriptor(ref[2].vector.copy(), "q0")]
    assert nn_distances(qry, ref)[0] == 0.0
    with pytest.raises(ValueError, match="empty reference"):
        nn_distances(qry, [])
    with pytest.raises(ValueError, match="dimensions differ"):
        nn_distances(qry, rng.standard_normal((3, 7)))
    with pytest.raises(ValueError, match="non-finite"):
        Descriptor(np.array([1.0, np.nan]), "bad")


def test_histogram_summary():
    vals = np.arange(10, dtype=np.float64)
    h = histogram_summary(vals, bins=5)
    assert sum(h["counts"]) == 10
    assert h["min"] == 0.0 and h["max"] == 9.0 and h["mean"] == 4.5
    assert len(h["edges"]) == 6


def test_descriptor_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    descs = [Descriptor(rng.standard_normal(3), f"id{i}") for i in range(4)]
    path = tmp_path / "d.csv"
    save_descriptors(path, descs)
    back = load_descriptors(path)
    assert [d.id for d in back] == [d.id for d in descs]
    for a, b in zip(back, descs):
        assert np.array_equal(a.vector, b.vector)  # repr() roundtrips float64
    with pytest.raises(ValueError, match="nothing to save"):
        save_descriptors(tmp_path / "e.csv", [])
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        load_descriptors(tmp_path / "bad.csv")
