"""Forward degradation operators for synthesizing benchmark inputs.

These exist only to manufacture (clean, degraded) pairs; the restoration call
path never sees this module.  Every operator is a pure function of its spec and
seed, and unless disabled each result gets the benchmark-wide additive Gaussian
noise floor (sigma = 0.02) on top.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorimage import Image, Kernel2D, convolve2d, resample, write_dimg
from .util import philox

KINDS = (
    "gaussian_noise",
    "speckle_mix",
    "gaussian_blur",
    "downsample_sr",
    "jpeg_block",
    "smooth_warp",
)

DEFAULT_FLOOR_SIGMA = 0.02

# Baseline JPEG luminance quantization table.
_Q_LUM = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

_SR_SIGMA = {2: 1.0, 4: 2.0, 8: 3.0}

_PARAM_DEFAULTS: dict[str, dict[str, float]] = {
    "gaussian_noise": {"sigma": 0.25},
    "speckle_mix": {"sigma_g": 0.2, "sigma_s": 0.22},
    "gaussian_blur": {"sigma": 1.5, "size": 7},
    "downsample_sr": {"factor": 4, "size": 9},
    "jpeg_block": {"q": 5},
    "smooth_warp": {"amplitude": 2.5, "corr_length": 8.0},
}


@dataclass(frozen=True)
class DegradationSpec:
    """One forward model: kind, kind-specific parameters, and the seed."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    floor_sigma: float = DEFAULT_FLOOR_SIGMA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}; expected one of {KINDS}")
        merged = dict(_PARAM_DEFAULTS[self.kind])
        for key, val in self.params.items():
            if key not in merged:
                raise ValueError(f"unknown parameter {key!r} for kind {self.kind!r}")
            merged[key] = val
        _validate_params(self.kind, merged)
        if self.floor_sigma < 0:
            raise ValueError(f"floor_sigma must be >= 0, got {self.floor_sigma}")
        object.__setattr__(self, "params", merged)

    def with_seed(self, seed: int) -> "DegradationSpec":
        return DegradationSpec(self.kind, dict(self.params), int(seed), self.floor_sigma)


def _validate_params(kind: str, p: dict) -> None:
    if kind == "gaussian_noise" and p["sigma"] < 0:
        raise ValueError("gaussian_noise sigma must be >= 0")
    if kind == "speckle_mix" and (p["sigma_g"] < 0 or p["sigma_s"] < 0):
        raise ValueError("speckle_mix sigmas must be >= 0")
    if kind == "gaussian_blur":
        if p["sigma"] <= 0:
            raise ValueError("gaussian_blur sigma must be > 0")
        if int(p["size"]) % 2 == 0 or int(p["size"]) < 1:
            raise ValueError("gaussian_blur size must be odd and >= 1")
    if kind == "downsample_sr" and int(p["factor"]) < 2:
        raise ValueError("downsample_sr factor must be >= 2")
    if kind == "jpeg_block" and not 1 <= p["q"] <= 99:
        raise ValueError("jpeg_block q must be in [1, 99]")
    if kind == "smooth_warp":
        if p["amplitude"] < 0:
            raise ValueError("smooth_warp amplitude must be >= 0")
        if p["corr_length"] <= 0:
            raise ValueError("smooth_warp corr_length must be > 0")


def _gaussian_noise(x: np.ndarray, p: dict, rng: np.random.Generator) -> np.ndarray:
    return x + p["sigma"] * rng.standard_normal(x.shape)


def _speckle_mix(x: np.ndarray, p: dict, rng: np.random.Generator) -> np.ndarray:
    additive = p["sigma_g"] * rng.standard_normal(x.shape)
    speckle = x * (p["sigma_s"] * rng.standard_normal(x.shape))
    return x + additive + speckle


def _gaussian_blur(x: np.ndarray, p: dict, rng: np.random.Generator) -> np.ndarray:
    k = Kernel2D.gaussian(int(p["size"]), float(p["sigma"]))
    return convolve2d(Image(x), k, border="reflect").data


def _downsample_sr(x: np.ndarray, p: dict, rng: np.random.Generator) -> np.ndarray:
    factor = int(p["factor"])
    size = int(p["size"])
    sigma = _SR_SIGMA.get(factor, factor / 2.0)
    img = Image(x)
    size = min(size, min(img.height, img.width) // 2 * 2 - 1)
    blurred = convolve2d(img, Kernel2D.gaussian(size, sigma), border="reflect")
    small = resample(blurred, factor, "down")
    return resample(small, factor, "up").data


def _dct_matrix(n: int = 8) -> np.ndarray:
    i = np.arange(n)
    d = np.cos(np.pi * (2.0 * i[None, :] + 1.0) * i[:, None] / (2.0 * n)) * np.sqrt(2.0 / n)
    d[0, :] /= np.sqrt(2.0)
    return d


_DCT8 = _dct_matrix(8)


def scaled_quant_table(q: float) -> np.ndarray:
    """Standard IJG quality scaling of the luminance table (steps clamped to >= 1).

    q < 50 scales by 5000/q (harsh), q >= 50 by 200 - 2q; q = 50 is the base
    table.  This matches what mainstream encoders produce, so q = 5 yields the
    heavy blocking the benchmarks rely on.
    """
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    return np.clip(np.floor((_Q_LUM * scale + 50.0) / 100.0), 1.0, None)


def _jpeg_block(x: np.ndarray, p: dict, rng: np.random.Generator) -> np.ndarray:
    h, w, c = x.shape
    if h % 8 or w % 8:
        raise ValueError(f"jpeg_block needs dimensions divisible by 8, got {h}x{w}")
    table = scaled_quant_table(float(p["q"]))
    out = np.empty_like(x)
    for ch in range(c):
        u = x[:, :, ch] * 255.0 - 128.0
        blocks = u.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
        coeffs = np.einsum("ij,bcjk,lk->bcil", _DCT8, blocks, _DCT8)
        quant = np.round(coeffs / table) * table
        rec = np.einsum("ji,bcjk,kl->bcil", _DCT8, quant, _DCT8)
        out[:, :, ch] = (rec.transpose(0, 2, 1, 3).reshape(h, w) + 128.0) / 255.0
    return out


def _smooth_warp(x: np.ndarray, p: dict, rng: np.random.Generator) -> np.ndarray:
    h, w, c = x.shape
    amp = float(p["amplitude"])
    corr = float(p["corr_length"])
    size = int(2 * round(corr) + 1)
    size = min(size, (min(h, w) - 1) | 1)

    def field() -> np.ndarray:
        raw = rng.standard_normal((h, w, 1))
        smooth = convolve2d(Image(raw), Kernel2D.gaussian(size, corr / 2.0), "reflect").data[:, :, 0]
        smooth -= smooth.mean()
        std = smooth.std()
        return smooth * (amp / std) if std > 0 else smooth

    dy, dx = field(), field()
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    sy = np.clip(yy + dy, 0.0, h - 1.0)
    sx = np.clip(xx + dx, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (sy - y0)[:, :, None]
    wx = (sx - x0)[:, :, None]
    return (
        x[y0, x0] * (1 - wy) * (1 - wx)
        + x[y0, x1] * (1 - wy) * wx
        + x[y1, x0] * wy * (1 - wx)
        + x[y1, x1] * wy * wx
    )


_OPERATORS = {
    "gaussian_noise": _gaussian_noise,
    "speckle_mix": _speckle_mix,
    "gaussian_blur": _gaussian_blur,
    "downsample_sr": _downsample_sr,
    "jpeg_block": _jpeg_block,
    "smooth_warp": _smooth_warp,
}


def apply(spec: DegradationSpec, x: Image) -> Image:
    """Degrade x per the spec, then add the sigma = 0.02 noise floor (if enabled)."""
    rng = philox(spec.seed)
    out = _OPERATORS[spec.kind](x.data, spec.params, rng)
    if spec.floor_sigma > 0:
        out = out + spec.floor_sigma * rng.standard_normal(out.shape)
    return Image(out)


# ---------------------------------------------------------------------------
# benchmark materialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    clean_path: str
    degraded_path: str
    kind: str
    params_json: str
    seed: str

    def spec(self) -> DegradationSpec:
        payload = json.loads(self.params_json)
        return DegradationSpec(
            self.kind,
            payload.get("params", {}),
            int(self.seed),
            payload.get("floor_sigma", DEFAULT_FLOOR_SIGMA),
        )


MANIFEST_NAME = "manifest.csv"


def make_benchmark(clean_images: list[Image], specs: list[DegradationSpec],
                   out_dir: str | Path) -> list[ManifestEntry]:
    """Write clean and degraded DIIP-IMG pairs plus a manifest.

    Per-pair seeds derive deterministically from each spec's seed and the image
    index, so a fixed configuration reproduces the directory byte for byte.
    With no specs the manifest lists the clean files alone.
    """
    if not clean_images:
        raise ValueError("benchmark needs at least one clean image")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries: list[ManifestEntry] = []
    clean_paths = []
    for i, img in enumerate(clean_images):
        p = out / f"clean_{i:03d}.dimg"
        write_dimg(img, p)
        clean_paths.append(p)
    if not specs:
        entries = [
            ManifestEntry(str(p), "", "", "{}", "") for p in clean_paths
        ]
    else:
        for i, img in enumerate(clean_images):
            for spec in specs:
                pair = spec.with_seed(spec.seed + i)
                y = apply(pair, img)
                dp = out / f"degraded_{i:03d}_{spec.kind}.dimg"
                write_dimg(y, dp)
                payload = json.dumps(
                    {"params": pair.params, "floor_sigma": pair.floor_sigma}, sort_keys=True
                )
                entries.append(
                    ManifestEntry(str(clean_paths[i]), str(dp), pair.kind, payload, str(pair.seed))
                )
    write_manifest(entries, out / MANIFEST_NAME)
    return entries


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        for e in entries:
            wr.writerow([e.clean_path, e.degraded_path, e.kind, e.params_json, e.seed])


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"{path}: malformed manifest row {row!r}")
            entries.append(ManifestEntry(*row))
    return entries
