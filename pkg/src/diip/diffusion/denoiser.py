"""Noise-prediction models: the abstract contract and the small trainable net."""

from __future__ import annotations

import abc
import math

import torch
from torch import nn


class Denoiser(abc.ABC):
    """eps(z_t, t): predicts the noise component of z_t at diffusion step t.

    Evaluation must be pure (same inputs and weights give bit-identical outputs)
    and shape-preserving.  Weights are frozen during restoration.
    """

    @abc.abstractmethod
    def eval(self, z_t: torch.Tensor, t: int) -> torch.Tensor:
        """Predicted noise with the same (H, W, C) shape as z_t."""


def time_embedding(t: float, dim: int, dtype: torch.dtype) -> torch.Tensor:
    """Sinusoidal embedding of a scalar step index."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=dtype) / max(half - 1, 1)
    )
    ang = float(t) * freqs
    return torch.cat([torch.sin(ang), torch.cos(ang)])


class ConvDenoiser(nn.Module):
    """Small convolutional encoder-decoder with one skip and a time embedding.

    Spatial dims must be even (one stride-2 downsample).  Roughly 80k parameters
    at the default width, which is plenty for 16x16 / 32x32 synthetic data.
    """

    def __init__(self, channels: int = 1, base_width: int = 24, time_dim: int = 32):
        super().__init__()
        if channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {channels}")
        w = base_width
        self.channels = channels
        self.base_width = base_width
        self.time_dim = time_dim
        self.conv_in = nn.Conv2d(channels, w, 3, padding=1)
        self.down = nn.Conv2d(w, 2 * w, 3, stride=2, padding=1)
        self.mid1 = nn.Conv2d(2 * w, 2 * w, 3, padding=1)
        self.mid2 = nn.Conv2d(2 * w, 2 * w, 3, padding=1)
        self.up = nn.Conv2d(2 * w, w, 3, padding=1)
        self.fuse = nn.Conv2d(2 * w, w, 3, padding=1)
        self.conv_out = nn.Conv2d(w, channels, 3, padding=1)
        self.t_proj = nn.Sequential(
            nn.Linear(time_dim, 4 * w), nn.SiLU(), nn.Linear(4 * w, 2 * w)
        )
        self.act = nn.SiLU()

    def forward(self, x: torch.Tensor, t) -> torch.Tensor:
        if x.shape[-1] % 2 or x.shape[-2] % 2:
            raise ValueError(f"spatial dims must be even, got {tuple(x.shape[-2:])}")
        if isinstance(t, (int, float)):
            t = [float(t)] * x.shape[0]
        emb = torch.stack([time_embedding(float(ti), self.time_dim, x.dtype) for ti in t])
        tb = self.t_proj(emb)[:, :, None, None]
        h1 = self.act(self.conv_in(x))
        h2 = self.act(self.down(h1))
        h2 = h2 + tb
        h2 = self.act(self.mid1(h2))
        h2 = self.act(self.mid2(h2))
        h3 = self.act(self.up(torch.repeat_interleave(torch.repeat_interleave(h2, 2, -2), 2, -1)))
        h3 = self.act(self.fuse(torch.cat([h3, h1], dim=1)))
        return self.conv_out(h3)

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


class TrainedConvDenoiser(Denoiser):
    """Frozen ConvDenoiser behind the Denoiser contract (weights from a checkpoint)."""

    def __init__(self, net: ConvDenoiser):
        for p in net.parameters():
            p.requires_grad_(False)
        net.eval()
        self.net = net

    @property
    def channels(self) -> int:
        return self.net.channels

    def eval(self, z_t: torch.Tensor, t: int) -> torch.Tensor:
        x = z_t.permute(2, 0, 1).unsqueeze(0)
        out = self.net(x, int(t))
        return out.squeeze(0).permute(1, 2, 0)
