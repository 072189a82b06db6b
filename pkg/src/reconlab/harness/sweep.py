"""Privacy-grid sweeps: run every attack variant against every grid point
and emit one aggregate row per point.

Reports are a CSV of rows plus a JSON manifest (config echo, library
versions, seeds). Both are deterministic functions of the configuration:
reruns with the same seed produce byte-identical files, which is what
makes desk-scale experiments auditable after the fact.
"""

from __future__ import annotations

import csv
import io
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from .. import __version__
from ..accountant import WORST_CASE_CONFIG, AccountingOverflowError, mu_to_epsilon
from ..baselines import ReRoConfig, estimate_noise_sigma, rero_match, wavelet_denoise
from ..core import ImageTensor, Metric, make_rng, mse, pairwise_baseline, spawn_seeds, ssim
from ..diffusion import consensus_reconstruct, linear_schedule, reconstruct
from ..imprint import BinStatus, attack_batch, bin_occupancy, fit_imprint_config
from ..priors import fit_gmm, generate_dataset, gmm_predictor, load_prior, train_toy_denoiser
from ..priors.denoiser import TrainConfig
from ..release import privatize
from .config import AttackMode, ExperimentConfig

__all__ = [
    "METHODS",
    "SweepReport",
    "SweepRow",
    "epsilon_for_mu",
    "run_sweep",
    "write_report",
]

# candidate pool shared by matching, pairwise reference and target draws
POOL_SIZE = 64
BINNING_BATCH = 16
BINNING_BINS = 64

METHODS = ("attack", "noisy", "rero", "wavelet")


@dataclass(frozen=True)
class SweepRow:
    """Aggregates for one grid point; stats maps "<method>_<metric>_mean"
    and "..._std" to floats and is empty for failed points.
    """

    label: str
    mu: float
    clip_norm: float
    sigma: float
    epsilon: float
    status: str
    error: str = ""
    stats: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    reference: dict[str, float]
    manifest: dict[str, Any]


def _metric_fn(metric: Metric):
    return mse if metric is Metric.MSE else ssim


def epsilon_for_mu(mu_equiv: float) -> float:
    """Worst-case (single-step, full-batch) epsilon for a release strength;
    infinite budgets and accountant overflows both report inf.
    """
    if not np.isfinite(mu_equiv):
        return float("inf")
    try:
        return mu_to_epsilon(mu_equiv, WORST_CASE_CONFIG).epsilon
    except AccountingOverflowError:
        return float("inf")


def _build_predictor(cfg: ExperimentConfig, schedule, seed: int):
    source = cfg.prior
    if source.kind == "exact_gmm":
        prior, _ = load_prior(source.path)
        return gmm_predictor(prior, schedule)
    if source.kind == "toy_denoiser":
        train_cfg = TrainConfig(steps=source.steps, seed=seed, n_train=source.n_train)
        net, _ = train_toy_denoiser(cfg.dataset, schedule, train_cfg)
        return net
    images = generate_dataset(cfg.dataset, source.n_train, seed=seed)
    prior = fit_gmm(np.stack([im.data for im in images]), k=source.k, seed=seed)
    return gmm_predictor(prior, schedule)


def _binning_pairs(pool, layer, params, schedule, predictor, seed: int):
    """(candidate, true sample) pairs recovered by one batched trial."""
    rng = make_rng(seed)
    idx = rng.choice(len(pool), size=BINNING_BATCH, replace=False)
    batch = [pool[i] for i in idx]
    occupancy = bin_occupancy(batch, layer)
    owners = {}
    for s, im in enumerate(batch):
        n_active = int(np.sum(float(layer.direction @ im.data) > layer.cutoffs))
        if n_active > 0 and occupancy[n_active - 1] == 1:
            owners[n_active - 1] = s
    bins = attack_batch(batch, layer, params, schedule, predictor, seed=seed)
    return [
        (rec.candidate, batch[owners[rec.bin_index]])
        for rec in bins
        if rec.status is BinStatus.RECOVERED and rec.bin_index in owners
    ]


def _run_point(cfg, point, pool, predictor, layer, schedule, seed: int) -> dict[str, float]:
    params = point.params
    rng = make_rng(seed)
    trial_seeds = spawn_seeds(seed, cfg.trials * 2)
    values: dict[tuple[str, Metric], list[float]] = {
        (method, m): [] for method in METHODS for m in cfg.metrics
    }
    for i in range(cfg.trials):
        obs_seed, rec_seed = trial_seeds[2 * i], trial_seeds[2 * i + 1]
        target_index = int(rng.integers(len(pool)))
        target = pool[target_index]
        obs = privatize(target, params, seed=obs_seed)
        rescaled = obs.x_priv.with_data(obs.x_priv.data * obs.lam)

        if cfg.mode is AttackMode.SINGLE:
            image = reconstruct(obs, schedule, predictor, seed=rec_seed).image
            attacked = [(image, target)]
        elif cfg.mode is AttackMode.CONSENSUS:
            image = consensus_reconstruct(
                obs, schedule, predictor, k=cfg.consensus_k, seed=rec_seed
            ).image
            attacked = [(image, target)]
        else:
            attacked = _binning_pairs(pool, layer, params, schedule, predictor, rec_seed)

        match_cfg = ReRoConfig(candidates=tuple(pool), target_index=target_index, params=params)
        chosen = pool[rero_match(obs, match_cfg).chosen_index]
        sigma_hat = estimate_noise_sigma(rescaled).sigma
        denoised = wavelet_denoise(rescaled, sigma_hat)
        for m in cfg.metrics:
            fn = _metric_fn(m)
            values[("attack", m)].extend(fn(rec, truth) for rec, truth in attacked)
            values[("noisy", m)].append(fn(rescaled, target))
            values[("rero", m)].append(fn(chosen, target))
            values[("wavelet", m)].append(fn(denoised, target))

    stats: dict[str, float] = {}
    for method in METHODS:
        for m in cfg.metrics:
            series = np.array(values[(method, m)], dtype=np.float64)
            key = f"{method}_{m.value}"
            stats[f"{key}_mean"] = float(series.mean()) if series.size else float("nan")
            stats[f"{key}_std"] = float(series.std()) if series.size else float("nan")
    return stats


def run_sweep(cfg: ExperimentConfig) -> SweepReport:
    """Execute the grid and write report.csv + manifest.json.

    A failure inside one grid point (schedule overflow, training
    divergence, bad parameters) marks that row failed and the sweep moves
    on; failures outside the per-point loop still raise.
    """
    schedule = linear_schedule()
    pool_seed, prior_seed, points_root = spawn_seeds(cfg.seed, 3)
    pool = generate_dataset(cfg.dataset, POOL_SIZE, seed=pool_seed)
    predictor = _build_predictor(cfg, schedule, prior_seed)
    layer = (
        fit_imprint_config(pool, num_bins=BINNING_BINS)
        if cfg.mode is AttackMode.BINNING
        else None
    )
    reference = {m.value: pairwise_baseline(pool, m) for m in cfg.metrics}
    point_seeds = spawn_seeds(points_root, len(cfg.grid))
    rows = []
    for point, seed in zip(cfg.grid, point_seeds):
        epsilon = epsilon_for_mu(point.mu_equiv)
        try:
            stats = _run_point(cfg, point, pool, predictor, layer, schedule, seed)
            rows.append(
                SweepRow(
                    label=point.label,
                    mu=point.mu_equiv,
                    clip_norm=point.clip_norm,
                    sigma=point.params.sigma,
                    epsilon=epsilon,
                    status="ok",
                    stats=stats,
                )
            )
        except Exception as exc:  # recorded, not raised: one bad point must not kill the grid
            rows.append(
                SweepRow(
                    label=point.label,
                    mu=point.mu_equiv,
                    clip_norm=point.clip_norm,
                    sigma=point.params.sigma,
                    epsilon=epsilon,
                    status="failed",
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    manifest = {
        "config": cfg.to_dict(),
        "pool_size": POOL_SIZE,
        "reference": reference,
        "versions": {
            "reconlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    report = SweepReport(rows=tuple(rows), reference=reference, manifest=manifest)
    write_report(report, cfg.output_dir, cfg.metrics)
    return report


def _fmt(value: float) -> str:
    return repr(float(value))


def render_csv(report: SweepReport, metrics: tuple[Metric, ...]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    stat_cols = [
        f"{method}_{m.value}_{agg}"
        for method in METHODS
        for m in metrics
        for agg in ("mean", "std")
    ]
    ref_cols = [f"pairwise_{m.value}" for m in metrics]
    writer.writerow(
        ["label", "mu", "clip_norm", "sigma", "epsilon", "status", "error"]
        + stat_cols
        + ref_cols
    )
    for row in report.rows:
        cells = [
            row.label,
            _fmt(row.mu),
            _fmt(row.clip_norm),
            _fmt(row.sigma),
            _fmt(row.epsilon),
            row.status,
            row.error,
        ]
        cells += [_fmt(row.stats[c]) if c in row.stats else "" for c in stat_cols]
        cells += [_fmt(report.reference[m.value]) for m in metrics]
        writer.writerow(cells)
    return out.getvalue()


def write_report(
    report: SweepReport, output_dir: str | Path, metrics: tuple[Metric, ...]
) -> tuple[Path, Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    manifest_path = out / "manifest.json"
    csv_path.write_text(render_csv(report, metrics))
    manifest_path.write_text(json.dumps(report.manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, manifest_path
