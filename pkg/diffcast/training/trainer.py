"""Training loop: noised targets, condition dropout, Adam, DDIM validation."""

import copy
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel
from tqdm import tqdm

from diffcast.core.errors import ConfigError, NonFiniteError
from diffcast.data.dataset import PreparedDataset
from diffcast.diffusion.guidance import ConditionMask, apply_condition_dropout
from diffcast.diffusion.schedule import NoiseSchedule, forward_noise
from diffcast.evaluation.inference import (
    build_schedule,
    effective_guidance,
    evenly_spaced,
    forecast_examples,
    sampler_config,
)
from diffcast.evaluation.metrics import mae, mse
from diffcast.models.forecaster import DiffusionForecaster, Example, examples_from_windows
from diffcast.numeric.functional import mse as mse_loss
from diffcast.numeric.optim import Adam, clip_grad_norm
from diffcast.numeric.tensor import backward
from diffcast.training.checkpoint import Checkpoint, checkpoint_from_model
from diffcast.training.prefetch import BatchPrefetcher
from diffcast.utils.seeding import INIT, TRAIN, VALIDATION, rng_stream

logger = logging.getLogger(__name__)


class LogEntry(BaseModel):
    step: int
    loss: float
    grad_norm: float
    val_mse: Optional[float] = None
    val_mae: Optional[float] = None
    best: bool = False
    wall_time: float


@dataclass
class StepResult:
    loss: float
    grad_norm: float
    steps: list[int]
    masks: list[ConditionMask]


@dataclass
class FitResult:
    checkpoint: Checkpoint
    model: DiffusionForecaster
    log: list[LogEntry]
    best_val_mse: Optional[float] = None
    stopped_early: bool = False
    dropout_counts: dict[str, int] = field(default_factory=dict)


def train_step(model: DiffusionForecaster, optimizer: Adam, batch: Sequence[Example],
               schedule: NoiseSchedule, cfg, rng: np.random.Generator,
               coupled: bool = False) -> StepResult:
    """One optimizer update on the mean per-example denoising loss.

    Per example: draw ``k`` uniformly from ``1..K`` and Gaussian noise, noise
    the target, drop conditions, predict the clean target. Gradients of each
    example accumulate before a single clipped Adam step.
    """
    optimizer.zero_grad()
    scale = 1.0 / len(batch)
    total, ks, masks = 0.0, [], []
    for example in batch:
        k = int(rng.integers(1, schedule.K + 1))
        eps = rng.standard_normal(example.target.shape)
        y_k = forward_noise(example.target, k, schedule, eps)
        mask = apply_condition_dropout(cfg.p_uncond_t, cfg.p_uncond_d, rng, coupled=coupled)
        try:
            pred = model.forward(y_k, k, example.conditions,
                                 drop_time=mask.drop_time, drop_text=mask.drop_text)
            loss = mse_loss(pred, example.target)
        except NonFiniteError as exc:
            raise NonFiniteError(f"non-finite loss at k={k} for sample {example.sample_id}: {exc}") from exc
        backward(loss * scale)
        total += loss.item()
        ks.append(k)
        masks.append(mask)
    grads, norm = clip_grad_norm(optimizer.gradients(), cfg.grad_clip)
    optimizer.step(grads)
    return StepResult(loss=total * scale, grad_norm=norm, steps=ks, masks=masks)


def validate(model: DiffusionForecaster, examples: Sequence[Example], config,
             schedule: NoiseSchedule) -> tuple[float, float]:
    """MSE/MAE of full DDIM-sampled forecasts on ``examples``."""
    preds = forecast_examples(model, examples, schedule, sampler_config(config.diffusion, config.seed),
                              effective_guidance(config), config.seed, stream=VALIDATION)
    truth = np.stack([ex.target for ex in examples])
    return mse(preds, truth), mae(preds, truth)


def fit(dataset: PreparedDataset, config, progress: Optional[bool] = None) -> FitResult:
    """Train on ``dataset.train``, keeping the parameters with the best validation MSE."""
    cfg = config.train
    train = examples_from_windows(dataset.train)
    if not train:
        raise ConfigError("training split is empty; lengthen the series or shrink l_in/l_out")
    val = examples_from_windows(evenly_spaced(dataset.val, cfg.val_windows))

    model = DiffusionForecaster(config.model, dataset.l_in, dataset.l_out, dataset.channels,
                                rng=rng_stream(config.seed, INIT))
    optimizer = Adam(model.params, lr=cfg.lr)
    schedule = build_schedule(config.diffusion)
    rng = rng_stream(config.seed, TRAIN)
    logger.info("Training %d parameters on %d windows (%d validation) for up to %d steps",
                model.params.count(), len(train), len(val), cfg.steps)

    log: list[LogEntry] = []
    counts = {"examples": 0, "drop_time": 0, "drop_text": 0}
    best = None
    best_mse, bad, stopped = math.inf, 0, False
    started = time.perf_counter()
    show = cfg.progress if progress is None else progress

    with BatchPrefetcher(len(train), cfg.batch_size, cfg.steps, config.seed, cfg.prefetch) as batches, \
            tqdm(total=cfg.steps, desc="train", disable=not show) as bar:
        for step, idx in enumerate(batches, start=1):
            result = train_step(model, optimizer, [train[i] for i in idx], schedule, cfg, rng,
                                coupled=config.model.coupled_cfg)
            counts["examples"] += len(result.masks)
            counts["drop_time"] += sum(m.drop_time for m in result.masks)
            counts["drop_text"] += sum(m.drop_text for m in result.masks)
            entry = {"step": step, "loss": result.loss, "grad_norm": result.grad_norm}
            bar.update(1)
            bar.set_postfix(loss=f"{result.loss:.4f}")

            if val and (step % cfg.val_every == 0 or step == cfg.steps):
                val_mse, val_mae = validate(model, val, config, schedule)
                entry.update(val_mse=val_mse, val_mae=val_mae)
                if val_mse < best_mse:
                    best_mse, bad = val_mse, 0
                    best = (step, model.params.to_arrays(), copy.deepcopy(optimizer.state),
                            copy.deepcopy(rng.bit_generator.state))
                    entry["best"] = True
                    logger.info("Step %d: validation MSE %.5f (new best)", step, val_mse)
                else:
                    bad += 1
                    logger.info("Step %d: validation MSE %.5f (best %.5f, %d/%d without improvement)",
                                step, val_mse, best_mse, bad, cfg.patience)
                    stopped = bad >= cfg.patience
            log.append(LogEntry(wall_time=time.perf_counter() - started, **entry))
            if stopped:
                logger.info("Early stopping at step %d", step)
                break

    last_step = log[-1].step
    rng_state = rng.bit_generator.state
    opt_state = optimizer.state
    if best is not None:
        last_step, arrays, opt_state, rng_state = best
        model.params.load_arrays(arrays)
    model.quantize_float32()
    checkpoint = checkpoint_from_model(
        model, config, step=last_step, channel_names=dataset.frame.channels,
        optimizer=opt_state, stats=dataset.stats,
        best_val_mse=None if best is None else best_mse,
    )
    checkpoint.rng_state = rng_state
    return FitResult(checkpoint=checkpoint, model=model, log=log,
                     best_val_mse=None if best is None else best_mse,
                     stopped_early=stopped, dropout_counts=counts)


def write_log(log: Sequence[LogEntry], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in log:
            fh.write(entry.model_dump_json() + "\n")
    return path
