"""The frozen generative mapping: schedule, denoisers, sampler, training."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .datasets import GMMImageSource, build_gmm, gmm_source, make_prototypes
from .denoiser import ConvDenoiser, Denoiser, TrainedConvDenoiser, time_embedding
from .gmm import AnalyticGMMDenoiser, GMMModel, analytic_gmm_eps, gmm_posterior_mean
from .schedule import (
    DEFAULT_BETA1,
    DEFAULT_BETAT,
    DEFAULT_DT,
    DEFAULT_T,
    NoiseSchedule,
    Sampler,
    ddim_generate,
    ddim_step,
    forward_diffuse,
    make_schedule,
    x0_hat_from,
)
from .training import TrainConfig, denoiser_mse_vs_oracle, train_denoiser

__all__ = [
    "AnalyticGMMDenoiser",
    "Checkpoint",
    "ConvDenoiser",
    "DEFAULT_BETA1",
    "DEFAULT_BETAT",
    "DEFAULT_DT",
    "DEFAULT_T",
    "Denoiser",
    "GMMImageSource",
    "GMMModel",
    "NoiseSchedule",
    "Sampler",
    "TrainConfig",
    "TrainedConvDenoiser",
    "analytic_gmm_eps",
    "build_gmm",
    "ddim_generate",
    "ddim_step",
    "denoiser_mse_vs_oracle",
    "forward_diffuse",
    "gmm_posterior_mean",
    "gmm_source",
    "load_checkpoint",
    "make_prototypes",
    "make_schedule",
    "save_checkpoint",
    "time_embedding",
    "train_denoiser",
    "x0_hat_from",
]
