"""Image container and the deterministic raster primitives everything else consumes.

All operations are pure: inputs are never mutated, outputs are fresh arrays, and
identical inputs give bit-identical outputs.  Images are H x W x C float64 rasters
with a nominal (not enforced) [0, 1] range; C is 1 or 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11

#: standard 4-neighbour discrete Laplacian stencil
LAPLACIAN_STENCIL = np.array(
    [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]], dtype=np.float64
)

_PAD_MODES = {"reflect": "symmetric", "replicate": "edge", "zero": "constant"}

DIMG_MAGIC = "DIIPIMG"
DIMG_VERSION = 1


@dataclass(frozen=True)
class Image:
    """H x W x C floating-point raster."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be HxWxC, got shape {np.shape(self.data)}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"degenerate image shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite samples")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Kernel2D:
    """Square odd-sized tap grid for 2D correlation."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"kernel must be square, got shape {w.shape}")
        if w.shape[0] % 2 == 0 or w.shape[0] < 1:
            raise ValueError(f"kernel size must be odd and >= 1, got {w.shape[0]}")
        if not np.isfinite(w).all():
            raise ValueError("kernel contains non-finite taps")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def identity(cls) -> "Kernel2D":
        return cls(np.ones((1, 1)))

    @classmethod
    def box(cls, size: int) -> "Kernel2D":
        k = cls(np.full((size, size), 1.0 / (size * size)))
        k._check_blur()
        return k

    @classmethod
    def gaussian(cls, size: int, sigma: float) -> "Kernel2D":
        """Truncated, renormalized Gaussian blur kernel."""
        if sigma <= 0:
            raise ValueError(f"gaussian sigma must be positive, got {sigma}")
        xs = np.arange(size, dtype=np.float64) - size // 2
        g1 = np.exp(-(xs**2) / (2.0 * sigma * sigma))
        w = np.outer(g1, g1)
        k = cls(w / w.sum())
        k._check_blur()
        return k

    @classmethod
    def laplacian(cls) -> "Kernel2D":
        k = cls(LAPLACIAN_STENCIL)
        if abs(k.weights.sum()) > 1e-12:
            raise AssertionError("laplacian taps must sum to 0")
        return k

    def _check_blur(self):
        if (self.weights < 0).any():
            raise ValueError("blur kernel taps must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("blur kernel taps must sum to 1")


def luminance(img: Image) -> np.ndarray:
    """H x W luminance plane (0.299 R + 0.587 G + 0.114 B for RGB)."""
    if img.channels == 1:
        return img.data[:, :, 0].copy()
    r, g, b = LUMA_WEIGHTS
    return r * img.data[:, :, 0] + g * img.data[:, :, 1] + b * img.data[:, :, 2]


def convolve2d(img: Image, k: Kernel2D, border: str = "reflect") -> Image:
    """Per-channel 2D correlation with the stated border handling.

    Output has the same shape as the input.  `border` is one of reflect
    (symmetric half-sample), replicate (edge) or zero.
    """
    if border not in _PAD_MODES:
        raise ValueError(f"unknown border mode {border!r}; expected one of {sorted(_PAD_MODES)}")
    if k.size > min(img.height, img.width):
        raise ValueError("kernel exceeds image extent")
    r = k.size // 2
    pad_kw = {"constant_values": 0.0} if border == "zero" else {}
    padded = np.pad(img.data, ((r, r), (r, r), (0, 0)), mode=_PAD_MODES[border], **pad_kw)
    h, w = img.height, img.width
    out = np.zeros_like(img.data)
    for i in range(k.size):
        for j in range(k.size):
            tap = k.weights[i, j]
            if tap != 0.0:
                out += tap * padded[i : i + h, j : j + w, :]
    return Image(out)


def laplacian_variance(img: Image) -> float:
    """Variance of the discrete Laplacian response over interior pixels.

    Color input is reduced to luminance first.  Interior-only evaluation keeps
    the score independent of any border policy.
    """
    if img.height < 3 or img.width < 3:
        raise ValueError("image too small for Laplacian")
    lum = luminance(img)
    resp = (
        lum[:-2, 1:-1]
        + lum[2:, 1:-1]
        + lum[1:-1, :-2]
        + lum[1:-1, 2:]
        - 4.0 * lum[1:-1, 1:-1]
    )
    return float(resp.var())


def psnr(a: Image, b: Image, peak: float = 1.0, cap: float = PSNR_CAP_DB) -> float:
    """10 log10(peak^2 / MSE) in dB; `cap` is returned for an exact match."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return cap
    return 10.0 * math.log10(peak * peak / mse)


def _ssim_window(size: int = SSIM_WINDOW, sigma: float = 1.5) -> np.ndarray:
    xs = np.arange(size, dtype=np.float64) - size // 2
    g1 = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    w = np.outer(g1, g1)
    return w / w.sum()


def ssim(a: Image, b: Image, peak: float = 1.0) -> float:
    """Mean local SSIM over sliding 11x11 Gaussian-weighted windows on luminance.

    Constants are the original ones: K1 = 0.01, K2 = 0.03, window sigma 1.5.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.height, a.width) < SSIM_WINDOW:
        raise ValueError(f"image smaller than SSIM window ({SSIM_WINDOW})")
    x = luminance(a)
    y = luminance(b)
    w = _ssim_window()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    def win_mean(plane: np.ndarray) -> np.ndarray:
        view = np.lib.stride_tricks.sliding_window_view(plane, (SSIM_WINDOW, SSIM_WINDOW))
        return np.einsum("ijkl,kl->ij", view, w)

    mu_x = win_mean(x)
    mu_y = win_mean(y)
    var_x = win_mean(x * x) - mu_x * mu_x
    var_y = win_mean(y * y) - mu_y * mu_y
    cov_xy = win_mean(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def resample(img: Image, factor: int, direction: str) -> Image:
    """Down = stride subsampling, up = nearest-neighbour replication."""
    if not isinstance(factor, int) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    if direction not in ("down", "up"):
        raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")
    if factor == 1:
        return Image(img.data.copy())
    if direction == "down":
        if img.height % factor or img.width % factor:
            raise ValueError(
                f"dimensions {img.height}x{img.width} not divisible by factor {factor}"
            )
        return Image(img.data[::factor, ::factor, :].copy())
    return Image(np.repeat(np.repeat(img.data, factor, axis=0), factor, axis=1))


# ---------------------------------------------------------------------------
# file formats: DIIP-IMG/1 (lossless float) and 8-bit PNG (human inspection)
# ---------------------------------------------------------------------------


def write_dimg(img: Image, path: str | Path) -> None:
    """Write the portable float-image format DIIP-IMG/1."""
    header = f"{DIMG_MAGIC} {DIMG_VERSION} {img.height} {img.width} {img.channels}\n"
    payload = img.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)


def read_dimg(path: str | Path) -> Image:
    with open(path, "rb") as fh:
        header = bytearray()
        while True:
            ch = fh.read(1)
            if not ch:
                raise ValueError(f"{path}: truncated DIIP-IMG header")
            if ch == b"\n":
                break
            header += ch
            if len(header) > 128:
                raise ValueError(f"{path}: oversized DIIP-IMG header")
        parts = header.decode("ascii", errors="replace").split()
        if len(parts) != 5 or parts[0] != DIMG_MAGIC or parts[1] != str(DIMG_VERSION):
            raise ValueError(f"{path}: not a DIIP-IMG/{DIMG_VERSION} file")
        h, w, c = (int(p) for p in parts[2:])
        count = h * w * c
        payload = fh.read(4 * count + 1)
        if len(payload) != 4 * count:
            raise ValueError(f"{path}: payload length does not match header shape")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(h, w, c)
    return Image(data)


def write_png(img: Image, path: str | Path) -> None:
    """Clamp to [0, 1], scale to 8-bit and write a PNG."""
    arr = np.clip(img.data, 0.0, 1.0)
    arr8 = np.round(arr * 255.0).astype(np.uint8)
    if img.channels == 1:
        PILImage.fromarray(arr8[:, :, 0], mode="L").save(path)
    else:
        PILImage.fromarray(arr8, mode="RGB").save(path)


def read_png(path: str | Path) -> Image:
    with PILImage.open(path) as pil:
        if pil.mode not in ("L", "RGB"):
            pil = pil.convert("RGB")
        arr = np.asarray(pil, dtype=np.float64) / 255.0
    return Image(arr)


def load_image(path: str | Path) -> Image:
    """Dispatch on extension: .dimg or anything Pillow can read."""
    p = Path(path)
    if p.suffix == ".dimg":
        return read_dimg(p)
    return read_png(p)
