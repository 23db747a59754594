"""Exact Gaussian-mixture denoiser: the desk-scale oracle for the frozen model.

For x0 drawn from a K-component isotropic GMM and z_t = sqrt(abar) x0 +
sqrt(1 - abar) eps, the posterior mean E[x0 | z_t] is available in closed form,
which makes the ideal noise prediction

    eps*(z_t, t) = (z_t - sqrt(abar_t) E[x0 | z_t]) / sqrt(1 - abar_t)

exact.  Everything is written in torch so restoration can differentiate
straight through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .denoiser import Denoiser
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class GMMModel:
    """Isotropic Gaussian mixture over images.

    means: (K, H, W, C) float64; variances: (K,) per-component isotropic
    variance; weights: (K,) mixture probabilities summing to 1.
    """

    means: torch.Tensor
    variances: torch.Tensor
    weights: torch.Tensor

    def __post_init__(self):
        means = torch.as_tensor(self.means, dtype=torch.float64)
        variances = torch.as_tensor(self.variances, dtype=torch.float64)
        weights = torch.as_tensor(self.weights, dtype=torch.float64)
        if means.ndim != 4:
            raise ValueError(f"means must be (K, H, W, C), got {tuple(means.shape)}")
        k = means.shape[0]
        if variances.shape != (k,) or weights.shape != (k,):
            raise ValueError("variances and weights must both have shape (K,)")
        if (variances < 0).any():
            raise ValueError("variances must be nonnegative")
        if (weights < 0).any():
            raise ValueError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {float(weights.sum())!r}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)

    @property
    def K(self) -> int:
        return self.means.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.means.shape[1:])

    @classmethod
    def from_arrays(cls, means: np.ndarray, sigma_d: float | np.ndarray, weights=None) -> "GMMModel":
        means = np.asarray(means, dtype=np.float64)
        k = means.shape[0]
        var = np.broadcast_to(np.asarray(sigma_d, dtype=np.float64) ** 2, (k,)).copy()
        if weights is None:
            weights = np.full(k, 1.0 / k)
        return cls(torch.from_numpy(means), torch.from_numpy(var), torch.as_tensor(weights, dtype=torch.float64))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n draws, shape (n, H, W, C)."""
        comps = rng.choice(self.K, size=n, p=self.weights.numpy())
        mu = self.means.numpy()[comps]
        std = np.sqrt(self.variances.numpy())[comps][:, None, None, None]
        return mu + std * rng.standard_normal(mu.shape)


def gmm_posterior_mean(z_t: torch.Tensor, t: int, gmm: GMMModel, sched: NoiseSchedule) -> torch.Tensor:
    """E[x0 | z_t] under z_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.

    Component responsibilities are evaluated in log space and normalized with a
    log-sum-exp (softmax), so widely separated modes stay numerically stable.
    """
    a = sched.abar(t)
    sa = a**0.5
    means = gmm.means.to(z_t.dtype)
    var = gmm.variances.to(z_t.dtype)
    w = gmm.weights.to(z_t.dtype)
    d = means[0].numel()
    # marginal variance of z_t under component k
    s2 = a * var + (1.0 - a)
    diff = z_t.unsqueeze(0) - sa * means
    sq = (diff * diff).sum(dim=(1, 2, 3))
    log_resp = torch.log(w) - 0.5 * sq / s2 - 0.5 * d * torch.log(s2)
    resp = torch.softmax(log_resp, dim=0)
    gain = (sa * var / s2).view(-1, 1, 1, 1)
    cond_mean = means + gain * diff
    return (resp.view(-1, 1, 1, 1) * cond_mean).sum(dim=0)


def analytic_gmm_eps(z_t: torch.Tensor, t: int, gmm: GMMModel, sched: NoiseSchedule) -> torch.Tensor:
    """Exact noise prediction for GMM data; differentiable w.r.t. z_t."""
    if not 1 <= t <= sched.T:
        raise ValueError(f"step index {t} outside [1, {sched.T}]")
    a = sched.abar(t)
    ex0 = gmm_posterior_mean(z_t, t, gmm, sched)
    return (z_t - (a**0.5) * ex0) / ((1.0 - a) ** 0.5)


class AnalyticGMMDenoiser(Denoiser):
    """Denoiser contract around the closed-form GMM noise prediction."""

    def __init__(self, gmm: GMMModel, sched: NoiseSchedule):
        self.gmm = gmm
        self.sched = sched

    @property
    def channels(self) -> int:
        return self.gmm.image_shape[2]

    def eval(self, z_t: torch.Tensor, t: int) -> torch.Tensor:
        return analytic_gmm_eps(z_t, t, self.gmm, self.sched)
