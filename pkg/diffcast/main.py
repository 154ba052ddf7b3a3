"""Command-line entrypoint: generate, train, forecast, evaluate, ablate, sweep.

Run with ``python -m diffcast.main <command> --help``. Exit codes: 0 on
success, 2 for usage or configuration problems, 1 for anything else.
"""

import functools
import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import click
import dotenv
import numpy as np
import pandas as pd

from diffcast.core.config import RunConfig, load_run_config, write_effective_config
from diffcast.core.errors import CheckpointError, ConfigError, DiffcastError
from diffcast.core.paths import runs_dir
from diffcast.data.dataset import PreparedDataset, load_source, prepare_dataset
from diffcast.data.series import FREQUENCY_OFFSETS, denormalize
from diffcast.data.synthetic import SyntheticSpec, generate_synthetic
from diffcast.diffusion.guidance import GuidanceWeights
from diffcast.evaluation.ablation import evaluate_model, parse_variants, run_ablation
from diffcast.evaluation.inference import (
    build_schedule,
    effective_guidance,
    sample_example,
    sampler_config,
    write_trace,
)
from diffcast.evaluation.report import EvalReport, HorizonMetrics, format_table, write_records
from diffcast.evaluation.sweeps import guidance_sweep, lambda_sweep, p_uncond_sweep
from diffcast.models.forecaster import examples_from_windows
from diffcast.training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from diffcast.training.trainer import fit, write_log
from diffcast.version import __version__

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.undf"


def setup_logging() -> None:
    dotenv.load_dotenv()
    logging.basicConfig(
        level=os.getenv("DIFFCAST_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


def reports_errors(fn):
    """Turn package errors into a one-line diagnostic and the matching exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DiffcastError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except Exception as exc:
            logger.debug("Unhandled error", exc_info=True)
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


# ----------------------------------------------------------------------
# Shared options
# ----------------------------------------------------------------------

# flag name -> dotted config key
OVERRIDE_FLAGS = {
    "seed": "seed",
    "data": "data.csv_path",
    "reports": "data.reports_path",
    "l_in": "data.l_in",
    "l_out": "data.l_out",
    "w_t": "guidance.w_t",
    "w_d": "guidance.w_d",
    "lam": "model.lam",
    "p_uncond_t": "train.p_uncond_t",
    "p_uncond_d": "train.p_uncond_d",
    "k_steps": "diffusion.k_steps",
    "inference_steps": "diffusion.inference_steps",
    "sampler": "diffusion.sampler",
    "fusion_mode": "model.fusion_mode",
    "steps": "train.steps",
    "denormalized": "eval.denormalized",
}

_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML run config."),
    click.option("--seed", type=int, help="Run seed."),
    click.option("--data", type=click.Path(dir_okay=False), help="Series CSV (data.csv_path)."),
    click.option("--reports", type=click.Path(dir_okay=False), help="Reports JSONL (data.reports_path)."),
    click.option("--l-in", type=int, help="History length."),
    click.option("--l-out", type=int, help="Forecast horizon."),
    click.option("--w-t", type=float, help="Timestamp guidance weight."),
    click.option("--w-d", type=float, help="Text guidance weight."),
    click.option("--lambda", "lam", type=float, help="Timestamp weight in the fused context."),
    click.option("--p-uncond-t", type=float, help="Timestamp dropout probability."),
    click.option("--p-uncond-d", type=float, help="Text dropout probability."),
    click.option("--k-steps", type=int, help="Diffusion steps K."),
    click.option("--inference-steps", type=int, help="DDIM inference steps."),
    click.option("--sampler", type=click.Choice(["ddim", "ddpm"]), help="Reverse sampler."),
    click.option("--fusion-mode", type=click.Choice(["unified", "sequential", "simple"]), help="Fusion mode."),
    click.option("--steps", type=int, help="Training step budget."),
    click.option("--denormalized/--normalized", default=None, help="Also report original-scale metrics."),
    click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."),
]


def run_options(fn):
    for option in reversed(_OPTIONS):
        fn = option(fn)
    return fn


def overrides_from(options: dict) -> dict[str, Any]:
    return {key: options.get(flag) for flag, key in OVERRIDE_FLAGS.items() if options.get(flag) is not None}


def resolve_config(options: dict, base: Optional[RunConfig] = None) -> RunConfig:
    """Config file (or ``base``) with flag overrides applied, validated up front."""
    overrides = overrides_from(options)
    if options.get("config_path"):
        return load_run_config(options["config_path"], overrides)
    if base is not None:
        return base.with_overrides(overrides)
    return load_run_config(None, overrides)


def output_dir(options: dict, command: str) -> Path:
    if options.get("out_dir"):
        return Path(options["out_dir"])
    return runs_dir() / f"{command}-{datetime.now():%Y%m%d-%H%M%S}"


def load_dataset(config: RunConfig) -> PreparedDataset:
    source = load_source(config.data, config.synthetic)
    return prepare_dataset(source, config.data)


TRAINED_DIFFUSION_FIELDS = ("k_steps", "beta_start", "beta_end")


def check_checkpoint_config(ckpt: Checkpoint, config: RunConfig) -> None:
    """Reject overrides of anything the checkpoint was trained with; sampling fields stay free."""
    trained = ckpt.config
    changed = [
        f"model.{name}" for name in type(config.model).model_fields
        if getattr(config.model, name) != getattr(trained.model, name)
    ]
    changed += [
        f"diffusion.{name}" for name in TRAINED_DIFFUSION_FIELDS
        if getattr(config.diffusion, name) != getattr(trained.diffusion, name)
    ]
    if changed:
        details = ", ".join(
            f"{key}={_lookup(trained, key)!r} (requested {_lookup(config, key)!r})" for key in changed
        )
        raise CheckpointError(f"checkpoint/config mismatch: checkpoint was trained with {details}")


def _lookup(config: RunConfig, key: str) -> Any:
    section, name = key.split(".")
    return getattr(getattr(config, section), name)


def checkpoint_dataset(ckpt: Checkpoint, config: RunConfig) -> PreparedDataset:
    dataset = load_dataset(config)
    dims = ckpt.dims
    if (dataset.l_in, dataset.l_out, dataset.channels) != (dims.l_in, dims.l_out, dims.channels):
        raise CheckpointError(
            f"checkpoint/config mismatch: checkpoint expects l_in={dims.l_in}, l_out={dims.l_out}, "
            f"channels={dims.channels}; data gives l_in={dataset.l_in}, l_out={dataset.l_out}, "
            f"channels={dataset.channels}"
        )
    return dataset


@click.group()
@click.version_option(__version__, prog_name="diffcast")
def cli() -> None:
    """Multimodal conditional diffusion forecaster."""
    setup_logging()


# ----------------------------------------------------------------------
# Data
# ----------------------------------------------------------------------

@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML with a 'synthetic' section.")
@click.option("--length", type=int, help="Number of rows.")
@click.option("--frequency", type=click.Choice(["daily", "weekly", "monthly"]))
@click.option("--channels", type=int)
@click.option("--event-rate", type=float)
@click.option("--seed", type=int)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@reports_errors
def generate(config_path, length, frequency, channels, event_rate, seed, out_dir) -> None:
    """Write a synthetic series, its reports and the event table."""
    base = load_run_config(config_path).synthetic if config_path else None
    overrides = {"length": length, "frequency": frequency, "channels": channels,
                 "event_rate": event_rate, "seed": seed}
    raw = (base or SyntheticSpec()).model_dump()
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        spec = SyntheticSpec.model_validate(raw)
    except ValueError as exc:
        raise ConfigError(f"invalid synthetic spec: {exc}") from exc
    out = Path(out_dir) if out_dir else runs_dir() / f"generate-{datetime.now():%Y%m%d-%H%M%S}"
    try:
        paths = generate_synthetic(spec).write(out)
    except OSError as exc:
        raise DiffcastError(f"cannot write to {out}: {exc}") from exc
    write_effective_config(RunConfig(synthetic=spec), out)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


# ----------------------------------------------------------------------
# Training and inference
# ----------------------------------------------------------------------

@cli.command()
@run_options
@reports_errors
def train(**options) -> None:
    """Train one model per horizon and save its best-validation checkpoint."""
    config = resolve_config(options)
    out = output_dir(options, "train")
    write_effective_config(config, out)
    source = load_source(config.data, config.synthetic)
    horizons = config.data.horizon_list
    for horizon in horizons:
        run_config = config.with_overrides({"data.l_out": horizon})
        dataset = prepare_dataset(source, run_config.data)
        result = fit(dataset, run_config)
        target = out if len(horizons) == 1 else out / f"h{horizon}"
        write_effective_config(run_config, target)
        save_checkpoint(result.checkpoint, target / CHECKPOINT_NAME)
        write_log(result.log, target / "train_log.jsonl")
        best = "-" if result.best_val_mse is None else f"{result.best_val_mse:.4f}"
        click.echo(f"horizon {horizon}: step {result.checkpoint.step}, best val MSE {best}, "
                   f"checkpoint {target / CHECKPOINT_NAME}")


@cli.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--split", type=click.Choice(["train", "val", "test"]), default="test", show_default=True)
@click.option("--window", type=int, default=-1, show_default=True, help="Window index within the split.")
@click.option("--trace", is_flag=True, help="Also write attention weights of the final step.")
@run_options
@reports_errors
def forecast(checkpoint_path, split, window, trace, **options) -> None:
    """Sample a forecast for one window and write it as CSV."""
    ckpt = load_checkpoint(checkpoint_path)
    config = resolve_config(options, base=ckpt.config)
    check_checkpoint_config(ckpt, config)
    out = output_dir(options, "forecast")
    write_effective_config(config, out)
    dataset = checkpoint_dataset(ckpt, config)
    windows = dataset.split(split)
    if not windows:
        raise ConfigError(f"the {split} split has no windows")
    if not -len(windows) <= window < len(windows):
        raise ConfigError(f"--window {window} is out of range for {len(windows)} {split} windows")
    chosen = windows[window]
    model = ckpt.build_model()
    example = examples_from_windows([chosen])[0]
    result = sample_example(model, example, build_schedule(config.diffusion),
                            sampler_config(config.diffusion, config.seed),
                            effective_guidance(config), config.seed, capture_trace=trace)

    stats = ckpt.stats or dataset.stats
    offset = FREQUENCY_OFFSETS[dataset.frame.frequency]
    stamps = pd.DatetimeIndex([chosen.forecast_start + i * offset for i in range(dataset.l_out)])
    frame = pd.DataFrame({"timestamp": stamps.strftime("%Y-%m-%d"), "step": np.arange(1, dataset.l_out + 1)})
    original = denormalize(result.forecast, stats)
    for c, name in enumerate(dataset.frame.channels):
        frame[name] = original[:, c]
        frame[f"{name}_norm"] = result.forecast[:, c]
    csv_path = out / "forecast.csv"
    frame.to_csv(csv_path, index=False, float_format="%.10g", lineterminator="\n")
    click.echo(f"forecast: {csv_path}")
    if trace:
        trace_path = write_trace(result.trace or [], out / "trace.undf",
                                 {"window_start": int(chosen.start), "split": split,
                                  "fusion_mode": config.model.fusion_mode})
        click.echo(f"trace: {trace_path}")


# ----------------------------------------------------------------------
# Evaluation
# ----------------------------------------------------------------------

@cli.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@run_options
@reports_errors
def evaluate(checkpoint_path, **options) -> None:
    """Score one checkpoint on the test split, averaged over the sampling seeds."""
    ckpt = load_checkpoint(checkpoint_path)
    config = resolve_config(options, base=ckpt.config)
    check_checkpoint_config(ckpt, config)
    out = output_dir(options, "evaluate")
    write_effective_config(config, out)
    dataset = checkpoint_dataset(ckpt, config)
    model = ckpt.build_model()
    stats = dataset.stats if config.eval.denormalized else None
    scores = [evaluate_model(model, dataset.test, config, seed, stats=stats) for seed in config.eval.seeds]
    report = EvalReport(variant="checkpoint", seeds=list(config.eval.seeds),
                        horizons=[HorizonMetrics(horizon=dataset.l_out, scores=scores)])
    _emit([report], out, config.eval.denormalized)


@cli.command()
@click.option("--variants", help="Comma-separated ablation variants.")
@click.option("--seeds", help="Comma-separated training seeds.")
@click.option("--workers", type=int, help="Parallel processes.")
@run_options
@reports_errors
def ablate(variants, seeds, workers, **options) -> None:
    """Train and score each variant with identical seeds and budgets."""
    config = resolve_config(options)
    names = parse_variants(variants) if variants else None
    out = output_dir(options, "ablate")
    write_effective_config(config, out)
    source = load_source(config.data, config.synthetic)
    reports = run_ablation(source, config, names, _parse_seeds(seeds), workers)
    _emit(reports, out, config.eval.denormalized)


@cli.command()
@click.option("--kind", type=click.Choice(["guidance", "lambda", "p-uncond"]), default="guidance",
              show_default=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(dir_okay=False),
              help="Trained model for the guidance sweep.")
@click.option("--seeds", help="Comma-separated seeds.")
@click.option("--workers", type=int, help="Parallel processes.")
@run_options
@reports_errors
def sweep(kind, checkpoint_path, seeds, workers, **options) -> None:
    """Guidance-weight grid on a trained model, or retraining sweeps over lambda / p_uncond."""
    if kind == "guidance":
        if not checkpoint_path:
            raise ConfigError("--checkpoint is required for the guidance sweep")
        ckpt = load_checkpoint(checkpoint_path)
        config = resolve_config(options, base=ckpt.config)
        check_checkpoint_config(ckpt, config)
        out = output_dir(options, "sweep")
        write_effective_config(config, out)
        dataset = checkpoint_dataset(ckpt, config)
        result = guidance_sweep(ckpt.build_model(), dataset.test, config)
        (out / "guidance_sweep.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
        click.echo(result.format())
        best = result.best
        click.echo(f"best: w_t={best.w_t:g} w_d={best.w_d:g} MSE {best.mse:.3f}")
        return
    config = resolve_config(options)
    out = output_dir(options, "sweep")
    write_effective_config(config, out)
    source = load_source(config.data, config.synthetic)
    run = lambda_sweep if kind == "lambda" else p_uncond_sweep
    reports = run(source, config, seeds=_parse_seeds(seeds), workers=workers)
    _emit(reports, out, config.eval.denormalized)


def _parse_seeds(text: Optional[str]) -> Optional[list[int]]:
    if not text:
        return None
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--seeds must be comma-separated integers, got {text!r}") from exc


def _emit(reports: list[EvalReport], out: Path, denormalized: bool) -> None:
    write_records(reports, out / "results.jsonl")
    table = format_table(reports, denormalized=denormalized)
    (out / "results.txt").write_text(table + "\n", encoding="utf-8")
    click.echo(table)


if __name__ == "__main__":
    cli()
