"""diip: blind image restoration by inverting a frozen deterministic diffusion
sampler, halted by self-supervised early-stopping criteria."""

__version__ = "0.1.0"

from .tensorimage import Image, Kernel2D  # noqa: F401
