"""Checkpoint save/load on top of the named-array container.

Records: every model parameter under its own name, plus Adam moments under
``adam.m/<name>`` and ``adam.v/<name>`` when optimizer state is kept.
Metadata: config snapshot, model dims, step, RNG state, optimizer scalars and
normalization stats.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from diffcast import __version__
from diffcast.core.config import RunConfig, validate_run_config
from diffcast.core.errors import CheckpointError, ShapeError
from diffcast.data.series import NormStats
from diffcast.models.forecaster import DiffusionForecaster
from diffcast.numeric.optim import OptimizerState
from diffcast.utils.container import read_container, write_container

logger = logging.getLogger(__name__)


@dataclass
class ModelDims:
    l_in: int
    l_out: int
    channels: int
    channel_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"l_in": self.l_in, "l_out": self.l_out, "channels": self.channels,
                "channel_names": list(self.channel_names)}


@dataclass
class Checkpoint:
    config: RunConfig
    dims: ModelDims
    params: dict[str, np.ndarray]
    step: int = 0
    rng_state: Optional[dict] = None
    optimizer: Optional[OptimizerState] = None
    stats: Optional[NormStats] = None
    best_val_mse: Optional[float] = None

    def build_model(self) -> DiffusionForecaster:
        """Instantiate a forecaster and load these parameters into it."""
        model = DiffusionForecaster(self.config.model, self.dims.l_in, self.dims.l_out, self.dims.channels)
        load_into(model, self)
        return model


def checkpoint_from_model(model: DiffusionForecaster, config: RunConfig, *, step: int = 0,
                          channel_names: Optional[list[str]] = None,
                          optimizer: Optional[OptimizerState] = None,
                          rng: Optional[np.random.Generator] = None,
                          stats: Optional[NormStats] = None,
                          best_val_mse: Optional[float] = None) -> Checkpoint:
    return Checkpoint(
        config=config,
        dims=ModelDims(model.l_in, model.l_out, model.channels, list(channel_names or [])),
        params=model.params.to_arrays(np.float32),
        step=step,
        rng_state=rng.bit_generator.state if rng is not None else None,
        optimizer=optimizer,
        stats=stats,
        best_val_mse=best_val_mse,
    )


def load_into(model: DiffusionForecaster, checkpoint: Checkpoint) -> None:
    try:
        model.params.load_arrays(checkpoint.params)
    except ShapeError as exc:
        raise CheckpointError(f"checkpoint does not fit this model: {exc}") from exc


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    arrays = dict(checkpoint.params)
    meta = {
        "kind": "checkpoint",
        "diffcast_version": __version__,
        "config": checkpoint.config.model_dump(mode="json"),
        "dims": checkpoint.dims.to_dict(),
        "step": int(checkpoint.step),
        "rng_state": checkpoint.rng_state,
        "stats": checkpoint.stats.to_dict() if checkpoint.stats is not None else None,
        "best_val_mse": checkpoint.best_val_mse,
        "optimizer": None,
    }
    if checkpoint.optimizer is not None:
        meta["optimizer"] = checkpoint.optimizer.scalars()
        for name, m in checkpoint.optimizer.m.items():
            arrays[f"adam.m/{name}"] = m
        for name, v in checkpoint.optimizer.v.items():
            arrays[f"adam.v/{name}"] = v
    path = write_container(path, arrays, meta)
    logger.info("Saved checkpoint (step %d) to %s", checkpoint.step, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Parse and validate a checkpoint file; nothing is returned on any error."""
    container = read_container(path)
    meta = container.metadata
    if meta.get("kind") != "checkpoint":
        raise CheckpointError(f"{path} is not a checkpoint")
    try:
        config = validate_run_config(meta["config"])
        dims = ModelDims(**meta["dims"])
        step = int(meta["step"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint metadata: {exc}") from exc

    params, m, v = {}, {}, {}
    for name, array in container.arrays.items():
        if name.startswith("adam.m/"):
            m[name[len("adam.m/"):]] = array.astype(np.float64)
        elif name.startswith("adam.v/"):
            v[name[len("adam.v/"):]] = array.astype(np.float64)
        else:
            params[name] = array

    optimizer = None
    if meta.get("optimizer"):
        scalars = meta["optimizer"]
        optimizer = OptimizerState(lr=scalars["lr"], beta1=scalars["beta1"], beta2=scalars["beta2"],
                                   eps=scalars["eps"], step=scalars["step"], m=m, v=v)
        unknown = sorted((set(m) | set(v)) - set(params))
        if unknown:
            raise CheckpointError(f"{path}: optimizer moments for unknown parameters {unknown}")

    stats = NormStats.from_dict(meta["stats"]) if meta.get("stats") else None
    logger.info("Loaded checkpoint (step %d) from %s", step, path)
    return Checkpoint(config=config, dims=dims, params=params, step=step,
                      rng_state=meta.get("rng_state"), optimizer=optimizer, stats=stats,
                      best_val_mse=meta.get("best_val_mse"))
