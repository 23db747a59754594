import time
from pathlib import Path

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

# ---------------------------------------------------------------------------
# desk-scale experiment recipe shared by the acceptance suite and e2e tests
# ---------------------------------------------------------------------------

RECIPE = {
    "hw": 16,
    "k_components": 10,
    "sigma_d": 0.05,
    "data_seed": 7,
    "dataset": "rects",
    "train_iters": 12000,
    "train_width": 32,
    "train_lr": 2e-3,
    "train_seed": 0,
    "inv_lr": 0.01,
    "inv_n": 800,
    "smooth": 5,
}


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def rand_image(rng, h=8, w=8, c=1):
    from diip.tensorimage import Image

    return Image(rng.uniform(0.0, 1.0, size=(h, w, c)))


@pytest.fixture(scope="session")
def sched1000():
    from diip.diffusion import make_schedule

    return make_schedule(1000)


@pytest.fixture(scope="session")
def accept_source():
    from diip.diffusion import gmm_source

    return gmm_source(RECIPE["dataset"], RECIPE["k_components"], RECIPE["hw"], RECIPE["hw"],
                      1, RECIPE["sigma_d"], seed=RECIPE["data_seed"])


@pytest.fixture(scope="session")
def accept_trained(request, sched1000, accept_source):
    """Toy denoiser checkpoint, trained once per machine (pytest cache)."""
    from diip.diffusion import TrainConfig, load_checkpoint, save_checkpoint, train_denoiser

    cache_dir = Path(request.config.cache.mkdir("diip_acceptance"))
    cfg = TrainConfig(iters=RECIPE["train_iters"], batch_size=16, lr=RECIPE["train_lr"],
                      seed=RECIPE["train_seed"], base_width=RECIPE["train_width"])
    tag = f"{accept_source.tag}-it{cfg.iters}w{cfg.base_width}s{cfg.seed}lr{cfg.lr:g}"
    path = cache_dir / f"{tag}.ckpt"
    if path.exists():
        return load_checkpoint(path)
    torch.set_num_threads(2)
    try:
        t0 = time.time()
        ckpt, _ = train_denoiser(accept_source, sched1000, cfg)
        print(f"\n[setup] trained toy denoiser in {time.time() - t0:.0f}s -> {path.name}")
    finally:
        torch.set_num_threads(1)
    save_checkpoint(ckpt, path)
    return ckpt


@pytest.fixture(scope="session")
def accept_sampler(accept_trained):
    from diip.diffusion import Sampler

    return Sampler(accept_trained.build_denoiser(dtype=torch.float32),
                   accept_trained.schedule(), 100)
