"""Checkpoint container and the DIIPCKPT1 binary format.

Layout: magic ``DIIPCKPT1``, u32 array count, then per array a manifest entry
(u32 name length, utf-8 name, u32 rank, u32 dims...) and finally the float32
little-endian payloads in manifest order.  Schedule parameters, architecture
and training metadata travel as reserved arrays inside the same manifest so a
checkpoint is self-contained and restoration cannot mismatch schedules.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .denoiser import ConvDenoiser, TrainedConvDenoiser
from .schedule import NoiseSchedule, make_schedule

MAGIC = b"DIIPCKPT1"
FORMAT_VERSION = 1

_META_KEY = "__meta__"
_TAG_KEY = "__dataset_tag__"
_LIMB = 1 << 24  # float32 represents integers exactly up to 2**24


def _split_seed(seed: int) -> tuple[int, int]:
    if not 0 <= seed < _LIMB * _LIMB:
        raise ValueError(f"seed {seed} outside storable range [0, 2^48)")
    return seed // _LIMB, seed % _LIMB


@dataclass
class Checkpoint:
    """Named float32 weight arrays plus schedule/architecture/training metadata."""

    arrays: dict[str, np.ndarray]
    T: int
    beta1: float
    betaT: float
    channels: int
    base_width: int
    time_dim: int
    dataset_tag: str = ""
    train_iters: int = 0
    seed: int = 0
    fmt_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.arrays = {k: np.asarray(v, dtype=np.float32) for k, v in self.arrays.items()}

    def schedule(self) -> NoiseSchedule:
        return make_schedule(self.T, self.beta1, self.betaT)

    def build_denoiser(self, dtype: torch.dtype = torch.float64) -> TrainedConvDenoiser:
        net = ConvDenoiser(self.channels, self.base_width, self.time_dim)
        state = {k: torch.from_numpy(v.copy()).to(dtype) for k, v in self.arrays.items()}
        net.to(dtype)
        net.load_state_dict(state)
        return TrainedConvDenoiser(net)

    @classmethod
    def from_net(cls, net: ConvDenoiser, sched: NoiseSchedule, dataset_tag: str = "",
                 train_iters: int = 0, seed: int = 0) -> "Checkpoint":
        arrays = {k: v.detach().cpu().numpy().astype(np.float32) for k, v in net.state_dict().items()}
        return cls(
            arrays=arrays,
            T=sched.T,
            beta1=sched.beta1,
            betaT=sched.betaT,
            channels=net.channels,
            base_width=net.base_width,
            time_dim=net.time_dim,
            dataset_tag=dataset_tag,
            train_iters=train_iters,
            seed=seed,
        )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    seed_hi, seed_lo = _split_seed(ckpt.seed)
    meta = np.array(
        [
            ckpt.fmt_version,
            ckpt.T,
            ckpt.beta1,
            ckpt.betaT,
            ckpt.train_iters,
            seed_hi,
            seed_lo,
            ckpt.channels,
            ckpt.base_width,
            ckpt.time_dim,
        ],
        dtype=np.float32,
    )
    tag = np.array([ord(c) for c in ckpt.dataset_tag], dtype=np.float32)
    ordered: list[tuple[str, np.ndarray]] = [(_META_KEY, meta), (_TAG_KEY, tag)]
    ordered += sorted(ckpt.arrays.items())

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(ordered)))
        for name, arr in ordered:
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for _, arr in ordered:
            fh.write(arr.astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a {MAGIC.decode()} checkpoint")
    off = len(MAGIC)
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    manifest: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off : off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", data, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        manifest.append((name, dims))
    arrays: dict[str, np.ndarray] = {}
    for name, dims in manifest:
        n = int(np.prod(dims, dtype=np.int64)) if dims else 1
        nbytes = 4 * n
        if off + nbytes > len(data):
            raise ValueError(f"{path}: payload for {name!r} exceeds file length")
        arrays[name] = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(dims).copy()
        off += nbytes
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes after payloads")

    if _META_KEY not in arrays:
        raise ValueError(f"{path}: missing {_META_KEY} record (no format version field)")
    meta = arrays.pop(_META_KEY).astype(np.float64)
    if len(meta) != 10:
        raise ValueError(f"{path}: malformed {_META_KEY} record")
    if int(meta[0]) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {int(meta[0])}")
    tag_arr = arrays.pop(_TAG_KEY, np.zeros(0, dtype=np.float32))
    tag = "".join(chr(int(c)) for c in tag_arr)
    return Checkpoint(
        arrays=arrays,
        T=int(meta[1]),
        beta1=float(meta[2]),
        betaT=float(meta[3]),
        channels=int(meta[7]),
        base_width=int(meta[8]),
        time_dim=int(meta[9]),
        dataset_tag=tag,
        train_iters=int(meta[4]),
        seed=int(meta[5]) * _LIMB + int(meta[6]),
        fmt_version=int(meta[0]),
    )
