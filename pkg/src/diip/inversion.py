"""Latent inversion of the frozen sampler: Adam descent on the initial noise z.

The objective is the squared reconstruction error ||g(z) - y||^2 with gradients
obtained by reverse-mode differentiation through every sampler step.  The run
produces a Trajectory: per-iteration scalars (loss, normalized slope, Laplacian
variance, optional reference PSNR) plus a bounded store of image snapshots so a
stopping rule can hand back an iterate it saw earlier without recomputation.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .tensorimage import Image, laplacian_variance, psnr, write_dimg
from .util import NonFiniteError, philox, resolve_dtype

DEFAULT_LR = 0.0015
DEFAULT_N_ITERS = 1500
DEFAULT_WINDOW = 16

TRAJECTORY_COLUMNS = ("k", "loss", "delta_k", "lap_var", "psnr_ref")


def normalized_slope(e_prev: float, e_curr: float) -> float:
    """Relative per-iteration loss change (E_k - E_{k-1}) / E_{k-1}.

    A zero previous loss means the fit is already exact; that is reported as
    0.0, the strongest possible "descent has flattened" signal.
    """
    if e_prev < 0.0:
        raise ValueError(f"loss must be nonnegative, got E_prev={e_prev}")
    if e_prev == 0.0:
        return 0.0
    return (e_curr - e_prev) / e_prev


@dataclass(frozen=True)
class Latent:
    """Initial-noise tensor being optimized, plus the seed that produced it."""

    z: torch.Tensor
    seed: int

    def __post_init__(self):
        if not torch.isfinite(self.z).all():
            raise ValueError("latent contains non-finite entries")


def init_latent(shape: tuple[int, int, int], seed: int, dtype: str | torch.dtype = "float64") -> Latent:
    """I.i.d. standard-normal latent from a seeded counter-based generator."""
    rng = philox(seed)
    z = rng.standard_normal(tuple(shape))
    return Latent(torch.from_numpy(z).to(resolve_dtype(dtype)), int(seed))


@dataclass(frozen=True)
class AdamState:
    """Bias-corrected Adam accumulators and hyperparameters."""

    m: torch.Tensor
    v: torch.Tensor
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, like: torch.Tensor, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> "AdamState":
        return cls(torch.zeros_like(like), torch.zeros_like(like), 0, lr, beta1, beta2, eps)


def adam_step(lat: Latent, grad: torch.Tensor, st: AdamState) -> tuple[Latent, AdamState]:
    """One deterministic bias-corrected Adam update of the latent."""
    if grad.shape != lat.z.shape:
        raise ValueError(f"gradient shape {tuple(grad.shape)} != latent shape {tuple(lat.z.shape)}")
    step = st.step + 1
    m = st.beta1 * st.m + (1.0 - st.beta1) * grad
    v = st.beta2 * st.v + (1.0 - st.beta2) * grad * grad
    m_hat = m / (1.0 - st.beta1**step)
    v_hat = v / (1.0 - st.beta2**step)
    z_new = lat.z - st.lr * m_hat / (torch.sqrt(v_hat) + st.eps)
    return Latent(z_new, lat.seed), replace(st, m=m, v=v, step=step)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    loss: float
    delta: float | None
    lap_var: float
    psnr_ref: float | None


class Trajectory:
    """Ordered per-iteration records plus a bounded snapshot store.

    Snapshots: a ring of the `window` most recent reconstructions, one pin at
    the most recent sharpness peak and one at the running sharpness argmax (the
    fallback target when a stop fires before any peak was seen).  Peak storage
    therefore never exceeds window + 2 images.
    """

    def __init__(self, window: int = DEFAULT_WINDOW):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self.records: list[IterationRecord] = []
        self._ring: OrderedDict[int, np.ndarray] = OrderedDict()
        self._peak_pin: tuple[int, np.ndarray] | None = None
        self._best_pin: tuple[int, np.ndarray] | None = None
        self._best_lap = -np.inf

    def append(self, rec: IterationRecord, snapshot: np.ndarray | None = None) -> None:
        if self.records and rec.k != self.records[-1].k + 1:
            raise ValueError(f"records must be gap-free: got k={rec.k} after {self.records[-1].k}")
        if not self.records and rec.k != 0:
            raise ValueError(f"first record must be k=0, got {rec.k}")
        self.records.append(rec)
        if snapshot is not None:
            self._ring[rec.k] = snapshot
            while len(self._ring) > self.window:
                self._ring.popitem(last=False)
            if rec.lap_var > self._best_lap:
                self._best_pin = (rec.k, snapshot)
                self._best_lap = rec.lap_var

    def pin_peak(self, k: int) -> None:
        """Pin the snapshot at a detected sharpness peak (kept until replaced)."""
        arr = self.snapshot_array(k)
        if arr is not None:
            self._peak_pin = (k, arr)

    def snapshot_array(self, k: int) -> np.ndarray | None:
        if k in self._ring:
            return self._ring[k]
        for pin in (self._peak_pin, self._best_pin):
            if pin is not None and pin[0] == k:
                return pin[1]
        return None

    def snapshot(self, k: int) -> Image | None:
        arr = self.snapshot_array(k)
        return None if arr is None else Image(arr.copy())

    def held_snapshots(self) -> dict[int, np.ndarray]:
        held = dict(self._ring)
        for pin in (self._peak_pin, self._best_pin):
            if pin is not None:
                held.setdefault(pin[0], pin[1])
        return held

    @property
    def n_records(self) -> int:
        return len(self.records)

    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def lap_vars(self) -> list[float]:
        return [r.lap_var for r in self.records]

    def psnrs(self) -> list[float | None]:
        return [r.psnr_ref for r in self.records]

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TRAJECTORY_COLUMNS)
            for r in self.records:
                wr.writerow([
                    r.k,
                    repr(r.loss),
                    "" if r.delta is None else repr(r.delta),
                    repr(r.lap_var),
                    "" if r.psnr_ref is None else repr(r.psnr_ref),
                ])

    @classmethod
    def load_csv(cls, path: str | Path) -> "Trajectory":
        traj = cls()
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd, None)
            if header is None or tuple(header) != TRAJECTORY_COLUMNS:
                raise ValueError(f"{path}: not a trajectory CSV (bad header {header})")
            for row in rd:
                k, loss, delta, lap, ps = row
                traj.append(
                    IterationRecord(
                        k=int(k),
                        loss=float(loss),
                        delta=None if delta == "" else float(delta),
                        lap_var=float(lap),
                        psnr_ref=None if ps == "" else float(ps),
                    )
                )
        return traj

    def save_snapshots(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        held = self.held_snapshots()
        paths = []
        for k in sorted(held):
            p = out / f"snap_{k}.dimg"
            write_dimg(Image(held[k].copy()), p)
            paths.append(p)
        return paths


@dataclass(frozen=True)
class InversionConfig:
    lr: float = DEFAULT_LR
    n_iters: int = DEFAULT_N_ITERS
    window: int = DEFAULT_WINDOW
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    dtype: str = "float64"

    def __post_init__(self):
        if self.n_iters < 0:
            raise ValueError(f"n_iters must be >= 0, got {self.n_iters}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


def _as_tensor(y, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(y, Image):
        return torch.from_numpy(y.data.copy()).to(dtype)
    return torch.as_tensor(y, dtype=dtype)


def _loss_grad_image(z: torch.Tensor, y_t: torch.Tensor, g) -> tuple[float, torch.Tensor, torch.Tensor]:
    zt = z.detach().requires_grad_(True)
    x = g.generate(zt)
    if x.shape != y_t.shape:
        raise ValueError(f"sampler output shape {tuple(x.shape)} != target shape {tuple(y_t.shape)}")
    loss = ((x - y_t) ** 2).sum()
    (grad,) = torch.autograd.grad(loss, zt)
    val = float(loss.detach())
    if not np.isfinite(val) or not torch.isfinite(grad).all():
        raise NonFiniteError("non-finite reconstruction loss or gradient")
    return val, grad.detach(), x.detach()


def recon_loss(z: Latent | torch.Tensor, y, g) -> tuple[float, torch.Tensor]:
    """||g(z) - y||^2 and its exact reverse-mode gradient w.r.t. z."""
    zt = z.z if isinstance(z, Latent) else z
    y_t = _as_tensor(y, zt.dtype)
    loss, grad, _ = _loss_grad_image(zt, y_t, g)
    return loss, grad


def run_inversion(y, g, cfg: InversionConfig, observers=(), reference: Image | None = None) -> Trajectory:
    """Iterate recon_loss + adam_step up to cfg.n_iters times or until an observer halts.

    Records k = 0..n_iters (the k=0 record is the untouched initialization, so
    n_iters = 0 yields exactly one record).  Sharpness is the Laplacian variance
    of each intermediate reconstruction; snapshots land in the trajectory's ring
    buffer with sharpness peaks pinned.  A non-finite loss aborts with the
    partial trajectory attached to the raised error.
    """
    dtype = resolve_dtype(cfg.dtype)
    y_t = _as_tensor(y, dtype)
    lat = init_latent(tuple(y_t.shape), cfg.seed, dtype)
    st = AdamState.fresh(lat.z, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    traj = Trajectory(window=cfg.window)
    prev_loss: float | None = None
    # local 3-point peak tracking used only to pin snapshots
    s2_hist: list[float] = []

    for k in range(cfg.n_iters + 1):
        try:
            loss, grad, x = _loss_grad_image(lat.z, y_t, g)
        except NonFiniteError as err:
            raise NonFiniteError(f"{err} at iteration {k}", trajectory=traj) from None
        x_arr = x.to(torch.float64).numpy()
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
        lat, st = adam_step(lat, grad, st)

    return traj
