"""Deep-Image-Prior comparator: train an untrained conv net to reproduce y.

The network parameters are optimized against a frozen noise input, the exact
mirror image of latent inversion (which optimizes the input against frozen
weights).  Runs record the same Trajectory fields so stopping criteria can be
replayed against DIP curves side by side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .inversion import IterationRecord, Trajectory, normalized_slope
from .tensorimage import Image, laplacian_variance, psnr
from .util import NonFiniteError, philox, resolve_dtype


class DipNet(nn.Module):
    """Encoder-decoder with one skip; ~130k parameters at the default width."""

    def __init__(self, out_channels: int = 1, noise_channels: int = 8, base_width: int = 32):
        super().__init__()
        w = base_width
        self.noise_channels = noise_channels
        self.conv_in = nn.Conv2d(noise_channels, w, 3, padding=1)
        self.down = nn.Conv2d(w, 2 * w, 3, stride=2, padding=1)
        self.mid1 = nn.Conv2d(2 * w, 2 * w, 3, padding=1)
        self.mid2 = nn.Conv2d(2 * w, 2 * w, 3, padding=1)
        self.up = nn.Conv2d(2 * w, w, 3, padding=1)
        self.fuse = nn.Conv2d(2 * w, w, 3, padding=1)
        self.conv_out = nn.Conv2d(w, out_channels, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h1 = self.act(self.conv_in(z))
        h2 = self.act(self.down(h1))
        h2 = self.act(self.mid1(h2))
        h2 = self.act(self.mid2(h2))
        h3 = self.act(self.up(torch.repeat_interleave(torch.repeat_interleave(h2, 2, -2), 2, -1)))
        h3 = self.act(self.fuse(torch.cat([h3, h1], dim=1)))
        return torch.sigmoid(self.conv_out(h3))

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


@dataclass(frozen=True)
class DipConfig:
    lr: float = 0.01
    n_iters: int = 1500
    window: int = 16
    seed: int = 0
    noise_channels: int = 8
    base_width: int = 32
    dtype: str = "float32"

    def __post_init__(self):
        if self.n_iters < 0:
            raise ValueError(f"n_iters must be >= 0, got {self.n_iters}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")


def dip_loss_and_grads(net: nn.Module, z: torch.Tensor, y_t: torch.Tensor):
    """Sum-of-squares reconstruction loss, its parameter gradients, and the output."""
    x = net(z)
    loss = ((x - y_t) ** 2).sum()
    grads = torch.autograd.grad(loss, list(net.parameters()), retain_graph=False)
    return float(loss.detach()), grads, x.detach()


def dip_run(y: Image, cfg: DipConfig, reference: Image | None = None, observers=()) -> Trajectory:
    """Optimize net parameters to reconstruct y from a fixed noise input.

    Mirrors run_inversion's recording contract: records k = 0..n_iters with the
    k = 0 entry taken at initialization, snapshots ringed and peaks pinned.
    """
    dtype = resolve_dtype(cfg.dtype)
    torch.manual_seed(cfg.seed)
    net = DipNet(out_channels=y.channels, noise_channels=cfg.noise_channels,
                 base_width=cfg.base_width).to(dtype)
    rng = philox(cfg.seed)
    z = torch.from_numpy(rng.standard_normal((1, cfg.noise_channels, y.height, y.width)) * 0.1)
    z = z.to(dtype)
    y_t = torch.from_numpy(y.data.copy()).to(dtype).permute(2, 0, 1).unsqueeze(0)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)

    traj = Trajectory(window=cfg.window)
    prev_loss: float | None = None
    s2_hist: list[float] = []
    for k in range(cfg.n_iters + 1):
        loss, grads, x = dip_loss_and_grads(net, z, y_t)
        if not np.isfinite(loss) or not all(torch.isfinite(gr).all() for gr in grads):
            raise NonFiniteError(f"DIP loss or gradient non-finite at iteration {k}",
                                 trajectory=traj)
        x_arr = x.squeeze(0).permute(1, 2, 0).to(torch.float64).numpy()
        sigma2 = laplacian_variance(Image(x_arr))
        delta = None if prev_loss is None else normalized_slope(prev_loss, loss)
        prev_loss = loss
        ps = None if reference is None else psnr(Image(x_arr), reference)
        traj.append(IterationRecord(k=k, loss=loss, delta=delta, lap_var=sigma2, psnr_ref=ps),
                    snapshot=x_arr)
        s2_hist.append(sigma2)
        if len(s2_hist) >= 3 and s2_hist[-3] < s2_hist[-2] and s2_hist[-1] < s2_hist[-2]:
            traj.pin_peak(k - 1)

        halted = False
        for obs in observers:
            if obs.observe(k, loss, delta, sigma2):
                halted = True
        if halted or k == cfg.n_iters:
            break
        for p, gr in zip(net.parameters(), grads):
            p.grad = gr
        opt.step()
    return traj
