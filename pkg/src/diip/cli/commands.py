"""Subcommand implementations behind the argparse front end."""

from __future__ import annotations

import csv
import statistics
from pathlib import Path

from .. import __version__
from ..degrade import DegradationSpec, make_benchmark, read_manifest
from ..diffusion import (
    AnalyticGMMDenoiser,
    Sampler,
    TrainConfig,
    build_gmm,
    gmm_source,
    load_checkpoint,
    make_schedule,
    save_checkpoint,
    train_denoiser,
)
from ..dipbaseline import DipConfig
from ..inversion import InversionConfig, Trajectory
from ..stopping import StopConfig, diip_restore
from ..tensorimage import Image, load_image, write_dimg, write_png
from ..util import resolve_dtype
from . import bench as benchmod
from .config import Param, config_hash, echo_config, parse_bool
from .plot import render_chart

# dataset/model parameters shared by several commands
_DATASET_PARAMS = [
    Param("dataset", str, "rects", "prototype family: rects|stripes|blobs"),
    Param("k_components", int, 8, "number of mixture components"),
    Param("sigma_d", float, 0.07, "per-component isotropic std"),
    Param("height", int, 16), Param("width", int, 16), Param("channels", int, 1),
    Param("data_seed", int, 7, "prototype generator seed", is_seed=False),
]

_SCHEDULE_PARAMS = [
    Param("t_steps", int, 1000, "diffusion steps T"),
    Param("beta1", float, 1e-4), Param("beta_t", float, 0.02),
    Param("dt", int, 100, "DDIM step size"),
]

_STOP_PARAMS = [
    Param("k_min", int, 100), Param("epsilon", float, 1e-3),
    Param("tau", int, 0), Param("smooth_window", int, 1),
]

_INV_PARAMS = [
    Param("lr", float, 0.0015), Param("iters", int, 1500),
    Param("window", int, 16), Param("seed", int, 0, is_seed=True),
    Param("dtype", str, "float64"),
]

TRAIN_SCHEMA = (
    [Param("out_dir", str, None, required=True)]
    + _DATASET_PARAMS
    + _SCHEDULE_PARAMS
    + [
        Param("train_iters", int, 2500), Param("batch", int, 16),
        Param("train_lr", float, 2e-3), Param("seed", int, 0, is_seed=True),
        Param("base_width", int, 24), Param("time_dim", int, 32),
        Param("train_dtype", str, "float32"),
    ]
)

DEGRADE_SCHEMA = (
    [Param("out_dir", str, None, required=True)]
    + _DATASET_PARAMS
    + [
        Param("count", int, 8, "number of clean images (first prototypes)"),
        Param("kinds", str, "gaussian_blur,speckle_mix,jpeg_block,smooth_warp"),
        Param("seed", int, 0, is_seed=True),
        Param("blur_sigma", float, 1.5), Param("blur_size", int, 7),
        Param("noise_sigma", float, 0.25),
        Param("speckle_sigma_g", float, 0.2), Param("speckle_sigma_s", float, 0.22),
        Param("jpeg_q", float, 5.0),
        Param("warp_amplitude", float, 2.5), Param("warp_corr", float, 8.0),
        Param("sr_factor", int, 4),
        Param("floor_sigma", float, 0.02),
    ]
)

MODEL_PARAMS = [
    Param("model", str, "analytic", "'analytic' or a checkpoint path"),
]

RESTORE_SCHEMA = (
    [
        Param("out_dir", str, None, required=True),
        Param("input", str, None, required=True, help="degraded image (.dimg or PNG)"),
        Param("reference", str, "", help="optional clean reference for PSNR tracking"),
    ]
    + MODEL_PARAMS
    + _DATASET_PARAMS
    + _SCHEDULE_PARAMS
    + _STOP_PARAMS
    + _INV_PARAMS
    + [Param("save_snapshots", parse_bool, True)]
)

BENCH_SCHEMA = (
    [
        Param("out_dir", str, None, required=True),
        Param("manifest", str, None, required=True),
    ]
    + MODEL_PARAMS
    + _DATASET_PARAMS
    + _SCHEDULE_PARAMS
    + _STOP_PARAMS
    + _INV_PARAMS
    + [
        Param("workers", int, 0, "0 = logical cores"),
        Param("kmin_sweep", str, "", "comma list, e.g. 50,100,150"),
        Param("eps_sweep", str, "", "comma list, e.g. 0.005,0.001,0.0005"),
        Param("include_dip", parse_bool, False),
        Param("dip_iters", int, 600), Param("dip_lr", float, 0.01),
        Param("save_trajectories", parse_bool, True),
    ]
)

REPORT_SCHEMA = [
    Param("out_dir", str, None, required=True),
    Param("trajectories", str, None, required=True, help="comma-separated trajectory CSVs"),
    Param("report_smooth", int, 5, "slope smoothing window for the minima table"),
]


def _build_sampler(cfg: dict, dtype_name: str) -> Sampler:
    """Frozen model from 'analytic' (GMM oracle) or a trained checkpoint."""
    if cfg["model"] == "analytic":
        sched = make_schedule(cfg["t_steps"], cfg["beta1"], cfg["beta_t"])
        gmm = build_gmm(cfg["dataset"], cfg["k_components"], cfg["height"], cfg["width"],
                        cfg["channels"], cfg["sigma_d"], cfg["data_seed"])
        den = AnalyticGMMDenoiser(gmm, sched)
    else:
        path = Path(cfg["model"])
        if not path.exists():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        ckpt = load_checkpoint(path)
        sched = ckpt.schedule()
        den = ckpt.build_denoiser(dtype=resolve_dtype(dtype_name))
    return Sampler(den, sched, cfg["dt"])


def _stop_config(cfg: dict) -> StopConfig:
    return StopConfig(k_min=cfg["k_min"], epsilon=cfg["epsilon"], tau=cfg["tau"],
                      smooth_window=cfg["smooth_window"])


def _inv_config(cfg: dict) -> InversionConfig:
    return InversionConfig(lr=cfg["lr"], n_iters=cfg["iters"], window=cfg["window"],
                           seed=cfg["seed"], dtype=cfg["dtype"])


def cmd_train(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    echo_config(cfg, out, __version__)
    sched = make_schedule(cfg["t_steps"], cfg["beta1"], cfg["beta_t"])
    source = gmm_source(cfg["dataset"], cfg["k_components"], cfg["height"], cfg["width"],
                        cfg["channels"], cfg["sigma_d"], cfg["data_seed"])
    tcfg = TrainConfig(iters=cfg["train_iters"], batch_size=cfg["batch"], lr=cfg["train_lr"],
                       seed=cfg["seed"], base_width=cfg["base_width"], time_dim=cfg["time_dim"],
                       dtype=cfg["train_dtype"])
    ckpt, losses = train_denoiser(source, sched, tcfg)
    save_checkpoint(ckpt, out / "model.ckpt")
    with open(out / "train_loss.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "loss"])
        for i, val in enumerate(losses):
            wr.writerow([i, repr(val)])
    print(f"trained {tcfg.iters} steps on {source.tag}; checkpoint at {out / 'model.ckpt'}")
    if losses:
        print(f"final training loss {losses[-1]:.6f}")
    return 0


def cmd_degrade(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    echo_config(cfg, out, __version__)
    protos = gmm_source(cfg["dataset"], max(cfg["k_components"], cfg["count"]), cfg["height"],
                        cfg["width"], cfg["channels"], cfg["sigma_d"], cfg["data_seed"])
    clean = [Image(protos.gmm.means[i].numpy().copy()) for i in range(cfg["count"])]
    kinds = [k.strip() for k in cfg["kinds"].split(",") if k.strip()]
    specs = []
    floor = cfg["floor_sigma"]
    params_by_kind = {
        "gaussian_noise": {"sigma": cfg["noise_sigma"]},
        "speckle_mix": {"sigma_g": cfg["speckle_sigma_g"], "sigma_s": cfg["speckle_sigma_s"]},
        "gaussian_blur": {"sigma": cfg["blur_sigma"], "size": cfg["blur_size"]},
        "downsample_sr": {"factor": cfg["sr_factor"]},
        "jpeg_block": {"q": cfg["jpeg_q"]},
        "smooth_warp": {"amplitude": cfg["warp_amplitude"], "corr_length": cfg["warp_corr"]},
    }
    for kind in kinds:
        if kind not in params_by_kind:
            raise ValueError(f"unknown degradation kind {kind!r}")
        specs.append(DegradationSpec(kind, params_by_kind[kind], seed=cfg["seed"],
                                     floor_sigma=floor))
    entries = make_benchmark(clean, specs, out)
    print(f"wrote {len(clean)} clean + {sum(1 for e in entries if e.degraded_path)} degraded "
          f"images to {out}")
    return 0


def cmd_restore(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    echo_config(cfg, out, __version__)
    input_path = Path(cfg["input"])
    if not input_path.exists():
        raise FileNotFoundError(f"input image not found: {input_path}")
    y = load_image(input_path)
    g = _build_sampler(cfg, cfg["dtype"])
    reference = load_image(cfg["reference"]) if cfg["reference"] else None
    result = diip_restore(y, g, _stop_config(cfg), _inv_config(cfg), reference=reference)
    write_dimg(result.image, out / "restored.dimg")
    write_png(result.image, out / "restored.png")
    result.report.save(out / "report.txt")
    result.trajectory.save_csv(out / "trajectory.csv")
    if cfg["save_snapshots"]:
        result.trajectory.save_snapshots(out / "snapshots")
    print(result.report.to_text().strip())
    return 0


def cmd_bench(cfg: dict) -> int:
    import os

    out = Path(cfg["out_dir"])
    echo_config(cfg, out, __version__)
    manifest_path = Path(cfg["manifest"])
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    entries = read_manifest(manifest_path)
    g = _build_sampler(cfg, cfg["dtype"])
    stop_cfg = _stop_config(cfg)
    inv_cfg = _inv_config(cfg)
    workers = cfg["workers"] if cfg["workers"] > 0 else (os.cpu_count() or 1)
    dip_cfg = None
    if cfg["include_dip"]:
        dip_cfg = DipConfig(lr=cfg["dip_lr"], n_iters=cfg["dip_iters"], seed=cfg["seed"])

    outcome = benchmod.run_benchmark(entries, g, stop_cfg, inv_cfg, workers=workers,
                                     dip_cfg=dip_cfg)
    benchmod.write_results_csv(outcome.rows, out / benchmod.RESULTS_NAME)
    benchmod.write_aggregate_csv(benchmod.aggregate_rows(outcome.rows), out / benchmod.AGGREGATE_NAME)

    if cfg["save_trajectories"]:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for i, traj in sorted(outcome.trajectories.items()):
            traj.save_csv(traj_dir / f"traj_{i:03d}.csv")

    for param, key in (("k_min", "kmin_sweep"), ("epsilon", "eps_sweep")):
        if cfg[key]:
            values = [float(v) for v in cfg[key].split(",")]
            rows = benchmod.sweep_param(outcome.trajectories, stop_cfg, param, values)
            benchmod.write_sweep_csv(rows, out / f"sweep_{param}.csv")

    for idx, msg in outcome.failures:
        print(f"image {idx} failed: {msg}")
    aggs = benchmod.aggregate_rows(outcome.rows) if outcome.rows else []
    for a in aggs:
        if a["kind"] == "all":
            print(f"{a['n']} images: PSNR self {a['psnr_self_mean']:.2f} dB, "
                  f"oracle {a['psnr_oracle_mean']:.2f} dB, median gap {a['gap_median']:.3f} dB")
    return 1 if outcome.failures else 0


def _smoothed(values: list[float | None], w: int) -> list[float | None]:
    out: list[float | None] = []
    acc: list[float] = []
    for v in values:
        if v is None:
            out.append(None)
            continue
        acc.append(v)
        win = acc[-w:]
        out.append(sum(win) / len(win))
    return out


def cmd_report(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    echo_config(cfg, out, __version__)
    paths = [p.strip() for p in cfg["trajectories"].split(",") if p.strip()]
    if not paths:
        raise ValueError("no trajectory CSVs given")
    trajs = []
    for p in paths:
        if not Path(p).exists():
            raise FileNotFoundError(f"trajectory not found: {p}")
        traj = Trajectory.load_csv(p)
        if not traj.records:
            raise ValueError(f"empty trajectory: {p}")
        trajs.append((Path(p).stem, traj))

    w = cfg["report_smooth"]
    loss_series, delta_series, lv_series, psnr_series = [], [], [], []
    minima_rows = []
    for name, traj in trajs:
        ks = [float(r.k) for r in traj.records]
        loss_series.append((ks, [r.loss for r in traj.records]))
        deltas = _smoothed([r.delta for r in traj.records], w)
        delta_series.append((ks, deltas))
        lv_series.append((ks, [r.lap_var for r in traj.records]))
        psnrs = [r.psnr_ref for r in traj.records]
        if any(p is not None for p in psnrs):
            psnr_series.append((ks, psnrs))
        defined = [(k, d) for k, d in zip(ks, deltas) if d is not None]
        slope_min_iter = int(min(defined, key=lambda kv: kv[1])[0]) if defined else -1
        lv_max_iter = int(max(zip(ks, [r.lap_var for r in traj.records]), key=lambda kv: kv[1])[0])
        psnr_max_iter = -1
        if any(p is not None for p in psnrs):
            psnr_max_iter = int(max((k for k, p in zip(ks, psnrs) if p is not None),
                                    key=lambda k: psnrs[int(k)]))
        minima_rows.append([name, slope_min_iter, lv_max_iter, psnr_max_iter])

    render_chart(loss_series, out / "loss.png", log_y=True)
    render_chart(delta_series, out / "delta.png", log_y=True)
    render_chart(lv_series, out / "lap_var.png")
    if psnr_series:
        render_chart(psnr_series, out / "psnr.png")
    with open(out / "minima.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["trajectory", "slope_min_iter", "lap_var_max_iter", "psnr_max_iter"])
        wr.writerows(minima_rows)
    print(f"report written to {out}")
    return 0
