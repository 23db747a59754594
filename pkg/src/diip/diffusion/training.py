"""Denoiser training: standard noise-prediction regression on synthetic data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..util import NonFiniteError, philox, resolve_dtype
from .checkpoint import Checkpoint
from .denoiser import ConvDenoiser
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class TrainConfig:
    iters: int = 2500
    batch_size: int = 16
    lr: float = 2e-3
    seed: int = 0
    base_width: int = 24
    time_dim: int = 32
    dtype: str = "float32"

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError(f"iters must be >= 0, got {self.iters}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")


def train_denoiser(dataset, sched: NoiseSchedule, cfg: TrainConfig) -> tuple[Checkpoint, list[float]]:
    """Minimize E||eps - eps_theta(sqrt(abar_t) x0 + sqrt(1-abar_t) eps, t)||^2.

    All randomness (weight init, batches, step indices, noise) derives from
    cfg.seed, so a fixed seed reproduces the checkpoint bit for bit.  Returns
    the checkpoint and the per-step loss log.
    """
    h, w, c = dataset.shape
    dtype = resolve_dtype(cfg.dtype)
    torch.manual_seed(cfg.seed)
    net = ConvDenoiser(channels=c, base_width=cfg.base_width, time_dim=cfg.time_dim).to(dtype)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    rng = philox(cfg.seed)
    ab = torch.from_numpy(sched.alpha_bar).to(dtype)

    losses: list[float] = []
    for step in range(cfg.iters):
        x0 = torch.from_numpy(dataset.sample(cfg.batch_size, rng)).to(dtype)
        x0 = x0.permute(0, 3, 1, 2)
        t = rng.integers(1, sched.T + 1, size=cfg.batch_size)
        eps = torch.from_numpy(rng.standard_normal(x0.shape)).to(dtype)
        a = ab[t].view(-1, 1, 1, 1)
        z_t = torch.sqrt(a) * x0 + torch.sqrt(1.0 - a) * eps
        pred = net(z_t, t)
        loss = ((pred - eps) ** 2).mean()
        val = float(loss.detach())
        if not np.isfinite(val):
            raise NonFiniteError(f"training loss non-finite at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(val)

    ckpt = Checkpoint.from_net(
        net, sched, dataset_tag=getattr(dataset, "tag", ""), train_iters=cfg.iters, seed=cfg.seed
    )
    return ckpt, losses


def denoiser_mse_vs_oracle(denoiser, oracle, gmm, sched, n_pairs: int, seed: int,
                           dtype: torch.dtype = torch.float64) -> tuple[float, float]:
    """Held-out comparison on fresh (z_t, t) pairs.

    Returns (mse of `denoiser` against `oracle`, the oracle's own irreducible
    mse against the true noise).  Both are means over all pairs and pixels.
    """
    rng = philox(seed)
    x0 = torch.from_numpy(gmm.sample(n_pairs, rng)).to(dtype)
    ts = rng.integers(1, sched.T + 1, size=n_pairs)
    sq_model = 0.0
    sq_floor = 0.0
    n_el = 0
    with torch.no_grad():
        for i in range(n_pairs):
            t = int(ts[i])
            eps = torch.from_numpy(rng.standard_normal(x0[i].shape)).to(dtype)
            a = sched.abar(t)
            z_t = (a**0.5) * x0[i] + ((1.0 - a) ** 0.5) * eps
            e_model = denoiser.eval(z_t, t)
            e_star = oracle.eval(z_t, t)
            sq_model += float(((e_model - e_star) ** 2).sum())
            sq_floor += float(((e_star - eps) ** 2).sum())
            n_el += eps.numel()
    return sq_model / n_el, sq_floor / n_el
