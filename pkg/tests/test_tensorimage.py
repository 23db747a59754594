"""Image primitives against brute-force scalar oracles."""

import math

import numpy as np
import pytest

from diip.tensorimage import (
    Image,
    Kernel2D,
    convolve2d,
    laplacian_variance,
    luminance,
    psnr,
    resample,
    ssim,
)

from conftest import rand_image


# ---------------------------------------------------------------------------
# brute-force reference implementations (double loops, no vectorization)
# ---------------------------------------------------------------------------


def pad_index(i: int, n: int, border: str) -> int:
    if 0 <= i < n:
        return i
    if border == "zero":
        return -1
    if border == "replicate":
        return min(max(i, 0), n - 1)
    # symmetric half-sample reflection: -1 -> 0, -2 -> 1, n -> n-1, ...
    while not 0 <= i < n:
        if i < 0:
            i = -i - 1
        else:
            i = 2 * n - i - 1
    return i


def conv_reference(img: Image, k: Kernel2D, border: str) -> np.ndarray:
    h, w, c = img.shape
    r = k.size // 2
    out = np.zeros((h, w, c))
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        ii = pad_index(i + di, h, border)
                        jj = pad_index(j + dj, w, border)
                        val = 0.0 if ii < 0 or jj < 0 else img.data[ii, jj, ch]
                        acc += k.weights[di + r, dj + r] * val
                out[i, j, ch] = acc
    return out


def lapvar_reference(img: Image) -> float:
    lum = luminance(img)
    h, w = lum.shape
    vals = []
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            vals.append(
                lum[i - 1, j] + lum[i + 1, j] + lum[i, j - 1] + lum[i, j + 1] - 4 * lum[i, j]
            )
    vals = np.array(vals)
    return float(((vals - vals.mean()) ** 2).mean())


def psnr_reference(a: Image, b: Image, peak: float = 1.0) -> float:
    total, n = 0.0, 0
    for i in range(a.height):
        for j in range(a.width):
            for ch in range(a.channels):
                d = a.data[i, j, ch] - b.data[i, j, ch]
                total += d * d
                n += 1
    return 10.0 * math.log10(peak * peak / (total / n))


def ssim_reference(a: Image, b: Image, peak: float = 1.0) -> float:
    x = luminance(a)
    y = luminance(b)
    size, sigma = 11, 1.5
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    win = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            di, dj = i - size // 2, j - size // 2
            win[i, j] = math.exp(-(di * di + dj * dj) / (2 * sigma * sigma))
    win /= win.sum()
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            mx = my = mxx = myy = mxy = 0.0
            for di in range(size):
                for dj in range(size):
                    wv = win[di, dj]
                    xv = x[i + di, j + dj]
                    yv = y[i + di, j + dj]
                    mx += wv * xv
                    my += wv * yv
                    mxx += wv * xv * xv
                    myy += wv * yv * yv
                    mxy += wv * xv * yv
            vx = mxx - mx * mx
            vy = myy - my * my
            cxy = mxy - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# convolve2d
# ---------------------------------------------------------------------------


def test_convolve_constant_preserved_by_blur():
    img = Image(np.full((6, 6, 1), 0.37))
    out = convolve2d(img, Kernel2D.gaussian(5, 1.2))
    assert np.allclose(out.data, 0.37, atol=1e-12)


def test_convolve_identity_kernel():
    img = Image(np.arange(48, dtype=float).reshape(4, 4, 3) / 48)
    out = convolve2d(img, Kernel2D.identity())
    assert np.array_equal(out.data, img.data)


@pytest.mark.parametrize("border", ["reflect", "replicate", "zero"])
def test_convolve_matches_double_loop_oracle(border, rng):
    ramp = Image(np.add.outer(np.arange(5.0), np.arange(5.0))[:, :, None] / 8.0)
    out = convolve2d(ramp, Kernel2D.box(3), border)
    ref = conv_reference(ramp, Kernel2D.box(3), border)
    assert np.max(np.abs(out.data - ref)) < 1e-12

    img = rand_image(rng, 7, 9, 3)
    k = Kernel2D(rng.uniform(-1, 1, (5, 5)))
    out = convolve2d(img, k, border)
    ref = conv_reference(img, k, border)
    assert np.max(np.abs(out.data - ref)) < 1e-12


def test_convolve_kernel_too_large():
    img = Image(np.zeros((4, 4, 1)))
    with pytest.raises(ValueError, match="kernel exceeds image extent"):
        convolve2d(img, Kernel2D.gaussian(5, 1.0))


def test_convolve_linearity(rng):
    a = rand_image(rng, 8, 8, 1)
    b = rand_image(rng, 8, 8, 1)
    k = Kernel2D.gaussian(3, 0.8)
    lhs = convolve2d(Image(0.6 * a.data + 1.7 * b.data), k)
    rhs = 0.6 * convolve2d(a, k).data + 1.7 * convolve2d(b, k).data
    assert np.max(np.abs(lhs.data - rhs)) < 1e-10


def test_convolve_does_not_mutate_input(rng):
    img = rand_image(rng, 6, 6, 1)
    before = img.data.copy()
    convolve2d(img, Kernel2D.gaussian(3, 1.0))
    assert np.array_equal(img.data, before)


# ---------------------------------------------------------------------------
# laplacian_variance
# ---------------------------------------------------------------------------


def test_lapvar_constant_zero():
    assert laplacian_variance(Image(np.full((8, 8, 1), 0.5))) == 0.0


def test_lapvar_impulse_matches_oracle():
    arr = np.zeros((8, 8, 1))
    arr[4, 3, 0] = 1.0
    img = Image(arr)
    assert laplacian_variance(img) == pytest.approx(lapvar_reference(img), abs=1e-12)


def test_lapvar_random_images_match_oracle(rng):
    for _ in range(5):
        img = rand_image(rng, 9, 7, 3)
        assert laplacian_variance(img) == pytest.approx(lapvar_reference(img), rel=1e-10)


def test_lapvar_blur_strictly_reduces_score(rng):
    k = Kernel2D.gaussian(5, 1.5)
    for _ in range(20):
        img = rand_image(rng, 12, 12, 1)
        blurred = convolve2d(img, k)
        assert laplacian_variance(blurred) < laplacian_variance(img)


def test_lapvar_shift_and_scale_invariances(rng):
    img = rand_image(rng, 10, 10, 1)
    base = laplacian_variance(img)
    shifted = laplacian_variance(Image(img.data + 0.31))
    assert shifted == pytest.approx(base, abs=1e-10)
    scaled = laplacian_variance(Image(img.data * 2.5))
    assert scaled == pytest.approx(base * 2.5**2, rel=1e-10)


def test_lapvar_too_small():
    with pytest.raises(ValueError, match="image too small for Laplacian"):
        laplacian_variance(Image(np.zeros((2, 5, 1))))


# ---------------------------------------------------------------------------
# psnr
# ---------------------------------------------------------------------------


def test_psnr_identical_capped(rng):
    img = rand_image(rng)
    assert psnr(img, img) == 99.0
    assert psnr(img, img, cap=60.0) == 60.0


def test_psnr_closed_form():
    a = Image(np.zeros((4, 4, 1)))
    b = Image(np.full((4, 4, 1), 0.1))  # MSE = 0.01
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)


def test_psnr_matches_scalar_oracle(rng):
    a = rand_image(rng, 6, 5, 3)
    b = rand_image(rng, 6, 5, 3)
    assert psnr(a, b) == pytest.approx(psnr_reference(a, b), abs=1e-10)


def test_psnr_symmetry_and_noise_monotonicity(rng):
    a = rand_image(rng, 8, 8, 1)
    b = rand_image(rng, 8, 8, 1)
    assert psnr(a, b) == psnr(b, a)
    noise = rng.standard_normal(a.shape)
    values = [psnr(a, Image(a.data + amp * noise)) for amp in (0.05, 0.1, 0.2)]
    assert values[0] > values[1] > values[2]


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        psnr(Image(np.zeros((4, 4, 1))), Image(np.zeros((4, 5, 1))))


# ---------------------------------------------------------------------------
# ssim
# ---------------------------------------------------------------------------


def test_ssim_self_similarity(rng):
    img = rand_image(rng, 12, 12, 1)
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)


def test_ssim_anticorrelated_checkerboard():
    board = np.indices((12, 12)).sum(axis=0) % 2
    a = Image(board.astype(float)[:, :, None])
    b = Image(1.0 - a.data)
    assert ssim(a, b) < 0.0


def test_ssim_constant_vs_constant_and_oracle(rng):
    a = Image(np.full((11, 11, 1), 0.3))
    b = Image(np.full((11, 11, 1), 0.6))
    val = ssim(a, b)
    assert val == pytest.approx(ssim_reference(a, b), abs=1e-9)
    assert 0.0 < val < 1.0  # luminance term < 1, structure term stabilized to 1

    x = rand_image(rng, 13, 12, 3)
    y = rand_image(rng, 13, 12, 3)
    assert ssim(x, y) == pytest.approx(ssim_reference(x, y), abs=1e-9)


def test_ssim_too_small():
    with pytest.raises(ValueError, match="smaller than SSIM window"):
        ssim(Image(np.zeros((8, 8, 1))), Image(np.zeros((8, 8, 1))))


# ---------------------------------------------------------------------------
# resample
# ---------------------------------------------------------------------------


def test_resample_factor_one_identity(rng):
    img = rand_image(rng)
    for direction in ("down", "up"):
        assert np.array_equal(resample(img, 1, direction).data, img.data)


def test_resample_down_constant():
    img = Image(np.full((8, 8, 1), 0.7))
    out = resample(img, 4, "down")
    assert out.shape == (2, 2, 1)
    assert np.all(out.data == 0.7)


def test_resample_down_up_matches_replication_oracle():
    ramp = Image(np.add.outer(np.arange(8.0), np.arange(8.0))[:, :, None] / 14.0)
    got = resample(resample(ramp, 2, "down"), 2, "up")
    ref = np.zeros((8, 8, 1))
    for i in range(8):
        for j in range(8):
            ref[i, j, 0] = ramp.data[(i // 2) * 2, (j // 2) * 2, 0]
    assert np.array_equal(got.data, ref)


def test_resample_non_divisible():
    with pytest.raises(ValueError, match="not divisible"):
        resample(Image(np.zeros((9, 8, 1))), 4, "down")


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


def test_image_validation():
    with pytest.raises(ValueError, match="channels must be 1 or 3"):
        Image(np.zeros((4, 4, 2)))
    with pytest.raises(ValueError, match="non-finite"):
        Image(np.full((4, 4, 1), np.nan))
    gray = Image(np.zeros((4, 5)))
    assert gray.shape == (4, 5, 1)


def test_kernel_validation():
    with pytest.raises(ValueError, match="odd"):
        Kernel2D(np.ones((4, 4)))
    with pytest.raises(ValueError, match="square"):
        Kernel2D(np.ones((3, 5)))
    assert abs(Kernel2D.gaussian(9, 2.0).weights.sum() - 1.0) < 1e-9
    assert (Kernel2D.gaussian(9, 3.0).weights >= 0).all()
    assert abs(Kernel2D.laplacian().weights.sum()) < 1e-12


def test_determinism(rng):
    img = rand_image(rng, 10, 10, 3)
    k = Kernel2D.gaussian(5, 1.1)
    a = convolve2d(img, k).data
    b = convolve2d(img, k).data
    assert np.array_equal(a, b)
    assert laplacian_variance(img) == laplacian_variance(img)
