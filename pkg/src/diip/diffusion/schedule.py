"""Noise schedule and the coarse-step deterministic DDIM sampler.

The arithmetic here is deliberately container-agnostic: every operation only
mixes its array argument with scalar coefficients, so the same code path serves
numpy arrays (plain evaluation) and torch tensors (differentiable evaluation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_T = 1000
DEFAULT_BETA1 = 1e-4
DEFAULT_BETAT = 0.02
DEFAULT_DT = 100


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal fractions abar_t for t = 0..T, abar_0 = 1."""

    T: int
    beta1: float
    betaT: float
    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.shape != (self.T + 1,):
            raise ValueError(f"alpha_bar must have length T+1={self.T + 1}, got {ab.shape}")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be exactly 1")
        if not ((ab > 0.0) & (ab <= 1.0)).all():
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if not (np.diff(ab) < 0.0).all():
            raise ValueError("alpha_bar must be strictly decreasing")
        object.__setattr__(self, "alpha_bar", ab)

    def abar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ValueError(f"step index {t} outside [0, {self.T}]")
        return float(self.alpha_bar[t])

    @property
    def terminal_ok(self) -> bool:
        """Whether abar_T is small enough (< 0.01) to treat z_T as pure noise."""
        return float(self.alpha_bar[-1]) < 0.01


def make_schedule(T: int, beta1: float = DEFAULT_BETA1, betaT: float = DEFAULT_BETAT) -> NoiseSchedule:
    """Linear beta schedule with abar_t as the running product of (1 - beta_s)."""
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    if not (0.0 < beta1 < betaT < 1.0):
        raise ValueError(f"need 0 < beta1 < betaT < 1, got beta1={beta1}, betaT={betaT}")
    betas = np.linspace(beta1, betaT, T, dtype=np.float64)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(T=T, beta1=float(beta1), betaT=float(betaT), alpha_bar=alpha_bar)


def _check_shapes(a, b, what: str):
    if getattr(a, "shape", None) != getattr(b, "shape", None):
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def forward_diffuse(x0, t: int, noise, sched: NoiseSchedule):
    """sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    _check_shapes(x0, noise, "forward_diffuse")
    a = sched.abar(t)
    return math.sqrt(a) * x0 + math.sqrt(1.0 - a) * noise


def x0_hat_from(z_t, eps_pred, t: int, sched: NoiseSchedule):
    """Clean-image estimate (z_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)."""
    _check_shapes(z_t, eps_pred, "x0_hat_from")
    if not 1 <= t <= sched.T:
        raise ValueError(f"step index {t} outside [1, {sched.T}]")
    a = sched.abar(t)
    return (z_t - math.sqrt(1.0 - a) * eps_pred) / math.sqrt(a)


def ddim_step(z_t, x0_hat, t: int, dt: int, sched: NoiseSchedule):
    """Deterministic (eta = 0) DDIM update from t to t - dt."""
    _check_shapes(z_t, x0_hat, "ddim_step")
    if not 1 <= t <= sched.T:
        raise ValueError(f"step index {t} outside [1, {sched.T}]")
    if t - dt < 0:
        raise ValueError(f"target step {t - dt} below 0")
    a_t = sched.abar(t)
    a_s = sched.abar(t - dt)
    eps_dir = (z_t - math.sqrt(a_t) * x0_hat) / math.sqrt(1.0 - a_t)
    return math.sqrt(a_s) * x0_hat + math.sqrt(1.0 - a_s) * eps_dir


def ddim_generate(z, den, sched: NoiseSchedule, dt: int = DEFAULT_DT):
    """Run the coarse DDIM chain from t = T down to 0 and return the final x0 estimate.

    This is the frozen deterministic mapping g(z).  With dt = T it collapses to a
    single x0_hat_from evaluation.
    """
    if dt < 1 or sched.T % dt != 0:
        raise ValueError(f"T={sched.T} must be divisible by dt={dt}")
    z_t = z
    x0h = None
    for t in range(sched.T, 0, -dt):
        eps = den.eval(z_t, t)
        x0h = x0_hat_from(z_t, eps, t, sched)
        if t > dt:
            z_t = ddim_step(z_t, x0h, t, dt, sched)
    return x0h


@dataclass(frozen=True)
class Sampler:
    """Frozen generative mapping g: denoiser + schedule + step size."""

    denoiser: object
    schedule: NoiseSchedule
    dt: int = DEFAULT_DT

    def __post_init__(self):
        if self.dt < 1 or self.schedule.T % self.dt != 0:
            raise ValueError(f"T={self.schedule.T} must be divisible by dt={self.dt}")

    def generate(self, z):
        return ddim_generate(z, self.denoiser, self.schedule, self.dt)

    @property
    def n_steps(self) -> int:
        return self.schedule.T // self.dt
