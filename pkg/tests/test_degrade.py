"""Degradation operators: fixed points, quantization lattice, manifests."""

import numpy as np
import pytest

from diip.degrade import (
    DegradationSpec,
    ManifestEntry,
    apply,
    make_benchmark,
    read_manifest,
    scaled_quant_table,
    _DCT8,
)
from diip.tensorimage import Image, psnr, read_dimg

from conftest import rand_image


def test_gaussian_noise_identity_when_disabled():
    img = Image(np.full((8, 8, 1), 0.5))
    spec = DegradationSpec("gaussian_noise", {"sigma": 0.0}, seed=1, floor_sigma=0.0)
    out = apply(spec, img)
    assert np.array_equal(out.data, img.data)


def test_noise_floor_applied_by_default():
    img = Image(np.full((8, 8, 1), 0.5))
    spec = DegradationSpec("gaussian_noise", {"sigma": 0.0}, seed=1)
    out = apply(spec, img)
    resid = out.data - img.data
    assert 0.005 < resid.std() < 0.05


def test_speckle_mix_magnitude(rng):
    img = rand_image(rng, 16, 16, 1)
    spec = DegradationSpec("speckle_mix", {}, seed=3, floor_sigma=0.0)
    out = apply(spec, img)
    resid = out.data - img.data
    # sigma_g = 0.2 plus signal-scaled speckle: combined magnitude near 0.3
    assert 0.15 < resid.std() < 0.45


def test_blur_reduces_high_frequency(rng):
    from diip.tensorimage import laplacian_variance

    img = rand_image(rng, 16, 16, 1)
    out = apply(DegradationSpec("gaussian_blur", {"sigma": 1.5, "size": 7}, floor_sigma=0.0), img)
    assert laplacian_variance(out) < laplacian_variance(img)


def test_downsample_sr_shape_preserved(rng):
    img = rand_image(rng, 16, 16, 1)
    out = apply(DegradationSpec("downsample_sr", {"factor": 4}, floor_sigma=0.0), img)
    assert out.shape == img.shape
    # block-replicated output: constant within each 4x4 cell
    blocks = out.data.reshape(4, 4, 4, 4, 1)
    assert np.allclose(blocks, blocks[:, :1, :, :1, :], atol=1e-12)


def test_jpeg_block_constant_blocks_dc_only():
    # per-block constant image: all AC coefficients are zero, only DC quantizes
    levels = np.array([[0.2, 0.6], [0.8, 0.4]])
    img = Image(np.kron(levels, np.ones((8, 8)))[:, :, None])
    out = apply(DegradationSpec("jpeg_block", {"q": 5}, floor_sigma=0.0), img)
    out_blocks = out.data.reshape(2, 8, 2, 8, 1)
    assert np.allclose(out_blocks, out_blocks[:, :1, :, :1, :], atol=1e-9)
    assert np.max(np.abs(out.data - img.data)) < 0.05


def test_jpeg_block_idempotent(rng):
    img = rand_image(rng, 16, 16, 1)
    spec = DegradationSpec("jpeg_block", {"q": 5}, floor_sigma=0.0)
    once = apply(spec, img)
    twice = apply(spec, once)
    assert np.max(np.abs(twice.data - once.data)) < 1e-9


def test_jpeg_block_output_on_quantization_lattice(rng):
    img = rand_image(rng, 16, 16, 1)
    q = 5
    out = apply(DegradationSpec("jpeg_block", {"q": q}, floor_sigma=0.0), img)
    table = scaled_quant_table(q)
    u = out.data[:, :, 0] * 255.0 - 128.0
    blocks = u.reshape(2, 8, 2, 8).transpose(0, 2, 1, 3)
    coeffs = np.einsum("ij,bcjk,lk->bcil", _DCT8, blocks, _DCT8)
    ratio = coeffs / table
    assert np.max(np.abs(ratio - np.round(ratio))) < 1e-9


def test_smooth_warp_displaces_but_preserves_range(rng):
    img = rand_image(rng, 16, 16, 1)
    out = apply(DegradationSpec("smooth_warp", {"amplitude": 2.5, "corr_length": 8.0},
                                seed=5, floor_sigma=0.0), img)
    assert out.shape == img.shape
    assert not np.array_equal(out.data, img.data)
    assert out.data.min() >= img.data.min() - 1e-9
    assert out.data.max() <= img.data.max() + 1e-9


def test_determinism_per_seed(rng):
    img = rand_image(rng, 16, 16, 1)
    for kind in ("gaussian_noise", "speckle_mix", "smooth_warp", "jpeg_block"):
        a = apply(DegradationSpec(kind, {}, seed=7), img)
        b = apply(DegradationSpec(kind, {}, seed=7), img)
        c = apply(DegradationSpec(kind, {}, seed=8), img)
        assert np.array_equal(a.data, b.data)
        if kind != "jpeg_block":  # jpeg only differs through the noise floor
            assert not np.array_equal(a.data, c.data)


def test_spec_validation():
    with pytest.raises(ValueError, match="unknown degradation kind"):
        DegradationSpec("salt_pepper")
    with pytest.raises(ValueError, match="unknown parameter"):
        DegradationSpec("gaussian_noise", {"wat": 1.0})
    with pytest.raises(ValueError, match="q must be"):
        DegradationSpec("jpeg_block", {"q": 0})
    with pytest.raises(ValueError, match="odd"):
        DegradationSpec("gaussian_blur", {"size": 4})


# ---------------------------------------------------------------------------
# make_benchmark
# ---------------------------------------------------------------------------


def _clean_set(rng, n=3):
    return [rand_image(rng, 16, 16, 1) for _ in range(n)]


def test_benchmark_empty_specs_lists_clean_only(tmp_path, rng):
    entries = make_benchmark(_clean_set(rng), [], tmp_path)
    assert len(entries) == 3
    assert all(e.degraded_path == "" for e in entries)
    assert (tmp_path / "manifest.csv").exists()


def test_benchmark_writes_pairs_and_roundtrips(tmp_path, rng):
    clean = _clean_set(rng)
    specs = [
        DegradationSpec("gaussian_blur", {"sigma": 1.5, "size": 7}, seed=1),
        DegradationSpec("speckle_mix", {}, seed=2),
    ]
    entries = make_benchmark(clean, specs, tmp_path)
    assert len(entries) == 6
    back = read_manifest(tmp_path / "manifest.csv")
    assert back == entries
    for e in back:
        y = read_dimg(e.degraded_path)
        x = read_dimg(e.clean_path)
        assert psnr(y, x) < 35.0  # nontrivial degradation
        assert e.spec().kind == e.kind


def test_benchmark_reproducible_bytes(tmp_path, rng):
    clean = _clean_set(rng)
    specs = [DegradationSpec("gaussian_noise", {"sigma": 0.2}, seed=9)]
    d1, d2 = tmp_path / "a", tmp_path / "b"
    make_benchmark(clean, specs, d1)
    make_benchmark(clean, specs, d2)
    for p1 in sorted(d1.iterdir()):
        p2 = d2 / p1.name
        if p1.suffix == ".dimg":
            assert p1.read_bytes() == p2.read_bytes()


def test_benchmark_distinct_seeds_per_image(tmp_path, rng):
    clean = [Image(np.full((8, 8, 1), 0.5)) for _ in range(2)]
    specs = [DegradationSpec("gaussian_noise", {"sigma": 0.2}, seed=0)]
    entries = make_benchmark(clean, specs, tmp_path)
    y0 = read_dimg(entries[0].degraded_path)
    y1 = read_dimg(entries[1].degraded_path)
    assert not np.array_equal(y0.data, y1.data)
