"""End-to-end diip_restore behavior on the three canonical input regimes."""

import numpy as np
import pytest
import torch

from diip.degrade import DegradationSpec, apply
from diip.inversion import InversionConfig, init_latent, run_inversion
from diip.stopping import StopConfig, diip_restore
from diip.tensorimage import Image, psnr

from conftest import RECIPE

STOP = StopConfig(k_min=100, epsilon=1e-3, tau=0, smooth_window=RECIPE["smooth"])


def _inv(seed=0, n=None):
    return InversionConfig(lr=RECIPE["inv_lr"], n_iters=n or RECIPE["inv_n"],
                           window=16, seed=seed, dtype="float32")


@pytest.fixture(scope="module")
def clean_images(accept_source):
    means = accept_source.gmm.means
    return [Image(means[i].numpy().copy()) for i in range(means.shape[0])]


def test_self_generated_input_stops_high_with_high_fidelity(accept_sampler):
    y = Image(accept_sampler.generate(init_latent((RECIPE["hw"], RECIPE["hw"], 1), seed=909,
                                                  dtype="float32").z).numpy())
    result = diip_restore(y, accept_sampler, STOP, _inv(seed=31, n=1500))
    assert result.report.criterion == "high"
    assert psnr(result.image, y) >= 40.0


def test_blurred_input_stops_low(accept_sampler, clean_images):
    y = apply(DegradationSpec("gaussian_blur", {"sigma": 2.0, "size": 9}, seed=4),
              clean_images[3])
    result = diip_restore(y, accept_sampler, STOP, _inv(seed=3), reference=clean_images[3])
    assert result.report.criterion == "low"
    assert result.report.n_star <= result.report.iters_run


def test_noisy_input_stops_high(accept_sampler, clean_images):
    y = apply(DegradationSpec("speckle_mix", {"sigma_g": 0.3, "sigma_s": 0.33}, seed=6),
              clean_images[2])
    result = diip_restore(y, accept_sampler, STOP, _inv(seed=2), reference=clean_images[2])
    assert result.report.criterion == "high"


def test_returned_image_is_bit_identical_to_rerun(accept_sampler, clean_images):
    y = apply(DegradationSpec("speckle_mix", {"sigma_g": 0.3, "sigma_s": 0.33}, seed=8),
              clean_images[1])
    result = diip_restore(y, accept_sampler, STOP, _inv(seed=11), reference=clean_images[1])
    n_star = result.report.n_star
    redo = run_inversion(y, accept_sampler, _inv(seed=11, n=n_star))
    again = redo.snapshot(n_star)
    assert again is not None
    assert np.array_equal(result.image.data, again.data)


def test_report_roundtrip_and_hash_stability(accept_sampler, clean_images):
    from diip.stopping import RestoreReport

    y = apply(DegradationSpec("gaussian_noise", {"sigma": 0.35}, seed=9), clean_images[0])
    r1 = diip_restore(y, accept_sampler, STOP, _inv(seed=5))
    r2 = diip_restore(y, accept_sampler, STOP, _inv(seed=5))
    assert r1.report == r2.report
    back = RestoreReport.from_text(r1.report.to_text())
    assert back == r1.report
