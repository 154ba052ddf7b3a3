"""Model scoring and the variant x horizon x seed ablation runner."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from diffcast.core.config import RunConfig
from diffcast.core.errors import ConfigError
from diffcast.data.dataset import DataSource, prepare_dataset
from diffcast.data.series import NormStats, denormalize
from diffcast.data.windows import WindowSample
from diffcast.diffusion.guidance import GuidanceWeights
from diffcast.evaluation.inference import (
    build_schedule,
    effective_guidance,
    evenly_spaced,
    forecast_examples,
    sampler_config,
)
from diffcast.evaluation.metrics import mae, mse, per_window_mse
from diffcast.evaluation.report import EvalReport, HorizonMetrics, SeedScore
from diffcast.models.forecaster import DiffusionForecaster, examples_from_windows
from diffcast.training.trainer import fit

logger = logging.getLogger(__name__)

# dotted config overrides that turn the full model into each ablation variant
VARIANTS: dict[str, dict[str, Any]] = {
    "full": {},
    "w/o-text": {"model.use_text": False},
    "w/o-timestamp": {"model.use_timestamps": False},
    "w/o-both": {"model.use_text": False, "model.use_timestamps": False},
    "sequential-fusion": {"model.fusion_mode": "sequential"},
    "simple-fusion": {"model.fusion_mode": "simple"},
    "coupled-cfg": {"model.coupled_cfg": True},
}


def parse_variants(variants: Union[str, Iterable[str]]) -> list[str]:
    if isinstance(variants, str):
        variants = [v.strip() for v in variants.split(",")]
    names = [v for v in variants if v]
    unknown = [v for v in names if v not in VARIANTS]
    if unknown:
        raise ConfigError(
            f"unknown variant(s) {', '.join(unknown)}; valid variants: {', '.join(VARIANTS)}"
        )
    if not names:
        raise ConfigError(f"no variants given; valid variants: {', '.join(VARIANTS)}")
    return names


def apply_variant(config: RunConfig, variant: str) -> RunConfig:
    parse_variants([variant])
    return config.with_overrides(VARIANTS[variant])


def evaluate_model(model: DiffusionForecaster, windows: Sequence[WindowSample], config: RunConfig,
                   seed: int, stats: Optional[NormStats] = None,
                   guidance: Optional[GuidanceWeights] = None) -> SeedScore:
    """Sample every window (up to ``eval.max_windows``) and score against the truth.

    Normalized metrics are always computed; original-scale metrics only when
    ``stats`` is given.
    """
    windows = evenly_spaced(windows, config.eval.max_windows)
    if not windows:
        raise ConfigError("no evaluation windows; lengthen the series or shrink l_in/l_out")
    examples = examples_from_windows(windows)
    preds = forecast_examples(model, examples, build_schedule(config.diffusion),
                              sampler_config(config.diffusion, seed),
                              effective_guidance(config, guidance), seed)
    truth = np.stack([ex.target for ex in examples])
    score = SeedScore(seed=seed, mse=mse(preds, truth), mae=mae(preds, truth), n_windows=len(examples),
                      per_window_mse=per_window_mse(preds, truth).tolist())
    if stats is not None:
        preds_o, truth_o = denormalize(preds, stats), denormalize(truth, stats)
        score.mse_denorm = mse(preds_o, truth_o)
        score.mae_denorm = mae(preds_o, truth_o)
    return score


@dataclass
class _Job:
    label: str
    config: RunConfig
    horizon: int
    seed: int
    denormalized: bool


def _run_job(source: DataSource, job: _Job) -> tuple[SeedScore, float]:
    started = time.perf_counter()
    config = job.config.with_overrides({"seed": job.seed, "data.l_out": job.horizon,
                                        "train.progress": False})
    dataset = prepare_dataset(source, config.data, l_out=job.horizon)
    result = fit(dataset, config, progress=False)
    score = evaluate_model(result.model, dataset.test, config, job.seed,
                           stats=dataset.stats if job.denormalized else None)
    return score, time.perf_counter() - started


def run_configs(source: DataSource, configs: Mapping[str, RunConfig], seeds: Sequence[int],
                workers: int = 1, denormalized: bool = False) -> list[EvalReport]:
    """Train and test every labeled config at every horizon and seed.

    Jobs are independent; with ``workers > 1`` they run in separate processes
    and results are assembled in job order, so the output does not depend on
    the worker count.
    """
    if not seeds:
        raise ConfigError("at least one seed is required")
    jobs = [
        _Job(label, config, horizon, seed, denormalized)
        for label, config in configs.items()
        for horizon in config.data.horizon_list
        for seed in seeds
    ]
    logger.info("Running %d jobs (%d configs, seeds %s) with %d worker(s)",
                len(jobs), len(configs), list(seeds), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, [source] * len(jobs), jobs))
    else:
        results = []
        for job in jobs:
            logger.info("Job %s horizon=%d seed=%d", job.label, job.horizon, job.seed)
            results.append(_run_job(source, job))

    by_key = {(j.label, j.horizon, j.seed): score for j, (score, _) in zip(jobs, results)}
    # summed job time; with several workers the variants overlap in real time
    seconds = {label: 0.0 for label in configs}
    for job, (_, elapsed) in zip(jobs, results):
        seconds[job.label] += elapsed
    reports = []
    for label, config in configs.items():
        horizons = [
            HorizonMetrics(horizon=h, scores=[by_key[(label, h, s)] for s in seeds])
            for h in config.data.horizon_list
        ]
        reports.append(EvalReport(variant=label, seeds=list(seeds), horizons=horizons,
                                  wall_time=seconds[label]))
    for report in reports:
        logger.info("%s: avg MSE %.4f, avg MAE %.4f", report.variant, report.avg_mse, report.avg_mae)
    return reports


def run_ablation(source: DataSource, config: RunConfig, variants: Optional[Sequence[str]] = None,
                 seeds: Optional[Sequence[int]] = None, workers: Optional[int] = None,
                 denormalized: Optional[bool] = None) -> list[EvalReport]:
    """One report per variant, each trained with the same seeds and budget."""
    names = parse_variants(variants if variants is not None else config.eval.variants)
    configs = {name: apply_variant(config, name) for name in names}
    return run_configs(
        source, configs,
        seeds=list(seeds if seeds is not None else config.eval.seeds),
        workers=workers or config.eval.workers,
        denormalized=config.eval.denormalized if denormalized is None else denormalized,
    )
