"""Self-supervised early stopping and the full blind-restoration procedure.

Two detectors watch the inversion trajectory.  The low-frequency one fires when
sharpness (Laplacian variance) starts dropping after a warm-up of k_min
iterations and returns the iterate at the last sharpness peak; the
high-frequency one fires when the normalized loss slope flattens (loss still
non-increasing but |slope| below epsilon) and returns the iterate tau steps
back.  Exactly one criterion can fire per run, after which the state freezes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .inversion import (
    InversionConfig,
    IterationRecord,
    Trajectory,
    normalized_slope,
    run_inversion,
)
from .tensorimage import Image

CRITERION_LOW = "low"
CRITERION_HIGH = "high"
CRITERION_NONE = "none"


@dataclass(frozen=True)
class StopConfig:
    """Detector thresholds; defaults follow the restoration recipe exactly."""

    k_min: int = 100
    epsilon: float = 1e-3
    tau: int = 0
    smooth_window: int = 1

    def __post_init__(self):
        if self.k_min < 2:
            raise ValueError(f"k_min must be >= 2, got {self.k_min}")
        # epsilon = 0 is allowed: it makes the high-frequency stop unreachable,
        # which is occasionally useful to isolate the low-frequency detector.
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.smooth_window < 1:
            raise ValueError(f"smooth_window must be >= 1, got {self.smooth_window}")


@dataclass(frozen=True)
class StopState:
    """Detector bookkeeping; immutable, advanced by the observe/check functions."""

    last_sharpness_peak_iter: int | None = None
    detected_high: bool = False
    detected_low: bool = False
    chosen_iter: int | None = None
    sigma2_history: tuple[float, ...] = ()
    delta_history: tuple[float, ...] = ()

    @property
    def frozen(self) -> bool:
        return self.detected_high or self.detected_low

    @property
    def criterion(self) -> str:
        if self.detected_low:
            return CRITERION_LOW
        if self.detected_high:
            return CRITERION_HIGH
        return CRITERION_NONE


def _argmax(values) -> int:
    best, best_i = None, 0
    for i, v in enumerate(values):
        if best is None or v > best:
            best, best_i = v, i
    return best_i


def observe_sharpness(state: StopState, k: int, sigma2_k: float, cfg: StopConfig) -> StopState:
    """Record sigma^2[k]; a local-max pattern moves the last-peak marker to k-1."""
    if state.frozen:
        return state
    hist = state.sigma2_history + (sigma2_k,)
    peak = state.last_sharpness_peak_iter
    if len(hist) >= 3 and hist[-3] < hist[-2] and hist[-1] < hist[-2]:
        peak = k - 1
    return replace(state, sigma2_history=hist, last_sharpness_peak_iter=peak)


def check_low_freq(state: StopState, k: int, sigma2_k: float, sigma2_prev: float | None,
                   cfg: StopConfig) -> StopState:
    """Fire when k > k_min and sharpness decreased; target is the last peak.

    If no peak was ever recorded the target falls back to the argmax of all
    recorded sharpness values.
    """
    if state.frozen or sigma2_prev is None:
        return state
    if k > cfg.k_min and sigma2_k < sigma2_prev:
        n_star = state.last_sharpness_peak_iter
        if n_star is None:
            n_star = _argmax(state.sigma2_history)
        return replace(state, detected_low=True, chosen_iter=n_star)
    return state


def check_high_freq(state: StopState, k: int, delta_k: float, cfg: StopConfig) -> StopState:
    """Fire when the (optionally smoothed) slope has flattened: descent with |slope| < epsilon.

    The raw condition "slope < epsilon" would trigger on any descending step;
    flattening means the loss is non-increasing while the relative decrease has
    shrunk below the threshold.  Target is k - tau.
    """
    if state.frozen:
        return state
    hist = state.delta_history + (delta_k,)
    w = min(cfg.smooth_window, len(hist))
    smoothed = sum(hist[-w:]) / w
    st = replace(state, delta_history=hist)
    if k > cfg.tau and smoothed <= 0.0 and abs(smoothed) < cfg.epsilon:
        return replace(st, detected_high=True, chosen_iter=k - cfg.tau)
    return st


class StoppingObserver:
    """Adapter binding both detectors to one inversion run, in algorithm order:
    sharpness tracking, then the low-frequency check, then the high-frequency
    check; the first to fire freezes the state."""

    def __init__(self, cfg: StopConfig):
        self.cfg = cfg
        self.state = StopState()

    def observe(self, k: int, loss: float, delta: float | None, sigma2: float) -> bool:
        st = observe_sharpness(self.state, k, sigma2, self.cfg)
        prev = st.sigma2_history[-2] if len(st.sigma2_history) >= 2 else None
        st = check_low_freq(st, k, sigma2, prev, self.cfg)
        if delta is not None:
            st = check_high_freq(st, k, delta, self.cfg)
        self.state = st
        return st.frozen


def fallback_iter(state: StopState) -> int:
    """No-detection target: the last sharpness peak, else the sharpest iterate seen."""
    if state.last_sharpness_peak_iter is not None:
        return state.last_sharpness_peak_iter
    if not state.sigma2_history:
        return 0
    return _argmax(state.sigma2_history)


def replay(records: list[IterationRecord], cfg: StopConfig) -> tuple[StopState, int]:
    """Drive the detectors over a saved trajectory without re-running inversion.

    Returns the final state and the iteration at which observation stopped
    (the firing iteration, or the last record if nothing fired).
    """
    obs = StoppingObserver(cfg)
    k = 0
    for rec in records:
        k = rec.k
        if obs.observe(rec.k, rec.loss, rec.delta, rec.lap_var):
            break
    return obs.state, k


def select_stop(records: list[IterationRecord], cfg: StopConfig) -> tuple[str, int, int]:
    """(criterion, n_star, stop_iteration) for a recorded trajectory."""
    state, k = replay(records, cfg)
    if state.frozen:
        return state.criterion, state.chosen_iter, k
    return CRITERION_NONE, fallback_iter(state), k


@dataclass(frozen=True)
class RestoreReport:
    criterion: str
    n_star: int
    iters_run: int
    loss_at_stop: float
    lap_var_at_stop: float
    config_hash: str

    def to_text(self) -> str:
        lines = [
            f"criterion = {self.criterion}",
            f"n_star = {self.n_star}",
            f"iters_run = {self.iters_run}",
            f"loss_at_stop = {self.loss_at_stop!r}",
            f"lap_var_at_stop = {self.lap_var_at_stop!r}",
            f"config_hash = {self.config_hash}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RestoreReport":
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                key, val = line.split("=", 1)
                kv[key.strip()] = val.strip()
        return cls(
            criterion=kv["criterion"],
            n_star=int(kv["n_star"]),
            iters_run=int(kv["iters_run"]),
            loss_at_stop=float(kv["loss_at_stop"]),
            lap_var_at_stop=float(kv["lap_var_at_stop"]),
            config_hash=kv["config_hash"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True)
class RestoreResult:
    image: Image
    report: RestoreReport
    trajectory: Trajectory
    state: StopState


def config_digest(stop_cfg: StopConfig, inv_cfg: InversionConfig) -> str:
    blob = repr((stop_cfg, inv_cfg)).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def diip_restore(y: Image, g, stop_cfg: StopConfig, inv_cfg: InversionConfig,
                 reference: Image | None = None) -> RestoreResult:
    """Blind restoration: invert the frozen sampler with both detectors attached.

    Returns the snapshot at the chosen iterate n* together with a report naming
    which criterion fired.  If neither fires within the iteration budget, the
    last sharpness-peak snapshot is returned with the "none" flag.
    """
    if stop_cfg.tau > inv_cfg.window:
        raise ValueError(f"tau={stop_cfg.tau} exceeds snapshot window {inv_cfg.window}")
    obs = StoppingObserver(stop_cfg)
    traj = run_inversion(y, g, inv_cfg, observers=(obs,), reference=reference)
    state = obs.state
    if state.frozen:
        n_star = state.chosen_iter
    else:
        n_star = fallback_iter(state)
    img = traj.snapshot(n_star)
    if img is None:
        raise RuntimeError(f"internal error: snapshot for n*={n_star} not retained")
    stop_rec = traj.records[min(n_star, len(traj.records) - 1)]
    report = RestoreReport(
        criterion=state.criterion,
        n_star=n_star,
        iters_run=traj.records[-1].k,
        loss_at_stop=stop_rec.loss,
        lap_var_at_stop=stop_rec.lap_var,
        config_hash=config_digest(stop_cfg, inv_cfg),
    )
    return RestoreResult(image=img, report=report, trajectory=traj, state=state)
