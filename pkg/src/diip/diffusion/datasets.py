"""Seeded synthetic image sources for desk-scale experiments.

Three families: "rects" (flat background with sharp-edged rectangles), "stripes"
(hard-thresholded oriented waves) and "blobs" (smooth Gaussian bumps).  The
first two carry strong high-frequency structure, which is what makes sharpness
tracking meaningful; blobs exist as a deliberately smooth contrast set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..util import philox
from .gmm import GMMModel

PROTOTYPE_KINDS = ("rects", "stripes", "blobs")


def _rect_image(h: int, w: int, c: int, rng: np.random.Generator) -> np.ndarray:
    img = np.full((h, w, c), rng.uniform(0.1, 0.4))
    for _ in range(int(rng.integers(2, 5))):
        rh = int(rng.integers(max(2, h // 5), max(3, (2 * h) // 3)))
        rw = int(rng.integers(max(2, w // 5), max(3, (2 * w) // 3)))
        r0 = int(rng.integers(0, h - rh + 1))
        c0 = int(rng.integers(0, w - rw + 1))
        level = rng.uniform(0.45, 0.95, size=c if c == 3 else None)
        img[r0 : r0 + rh, c0 : c0 + rw, :] = level
    return img


def _stripe_image(h: int, w: int, c: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    theta = rng.uniform(0.0, np.pi)
    freq = rng.uniform(2.0, 4.5) * 2.0 * np.pi / max(h, w)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    wave = np.sin(freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
    lo, hi = rng.uniform(0.1, 0.3), rng.uniform(0.7, 0.9)
    plane = np.where(wave > 0.0, hi, lo)
    img = np.repeat(plane[:, :, None], c, axis=2)
    if c == 3:
        img *= rng.uniform(0.8, 1.0, size=3)
    return img


def _blob_image(h: int, w: int, c: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full((h, w, c), rng.uniform(0.1, 0.3))
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        s = rng.uniform(h / 8.0, h / 3.0)
        amp = rng.uniform(0.3, 0.7)
        bump = amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * s * s))
        img += bump[:, :, None]
    return np.clip(img, 0.0, 1.0)


_BUILDERS = {"rects": _rect_image, "stripes": _stripe_image, "blobs": _blob_image}


def make_prototypes(kind: str, n: int, height: int, width: int, channels: int, seed: int) -> np.ndarray:
    """n deterministic prototype images, shape (n, H, W, C), values in [0, 1]."""
    if kind not in _BUILDERS:
        raise ValueError(f"unknown prototype kind {kind!r}; expected one of {PROTOTYPE_KINDS}")
    rng = philox(seed)
    return np.stack([_BUILDERS[kind](height, width, channels, rng) for _ in range(n)])


def build_gmm(kind: str, n_components: int, height: int, width: int, channels: int,
              sigma_d: float, seed: int) -> GMMModel:
    protos = make_prototypes(kind, n_components, height, width, channels, seed)
    return GMMModel.from_arrays(protos, sigma_d)


@dataclass(frozen=True)
class GMMImageSource:
    """Training-image source drawing from a GMM; the tag documents provenance."""

    gmm: GMMModel
    tag: str

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.gmm.image_shape

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.gmm.sample(n, rng)


def gmm_source(kind: str, n_components: int, height: int, width: int, channels: int,
               sigma_d: float, seed: int) -> GMMImageSource:
    gmm = build_gmm(kind, n_components, height, width, channels, sigma_d, seed)
    tag = f"{kind}{height}x{width}x{channels}-k{n_components}-sd{sigma_d:g}-seed{seed}"
    return GMMImageSource(gmm, tag)
