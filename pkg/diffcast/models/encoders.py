"""Modality encoders: series patches, calendar timestamps and the diffusion step.

Text encoders live in :mod:`diffcast.models.text`.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
import pandas as pd

from diffcast.core.errors import ConfigError, InputError, ShapeError
from diffcast.models.params import CALENDAR_FEATURES, ParamSpec, mlp_specs
from diffcast.numeric.functional import gelu, linear
from diffcast.numeric.tensor import Tensor


@dataclass(frozen=True)
class PatchConfig:
    patch_len: int = 16
    stride: int = 8
    d_model: int = 64

    def __post_init__(self):
        if not 1 <= self.stride <= self.patch_len:
            raise ConfigError(f"need 1 <= stride <= patch_len, got {self.stride}, {self.patch_len}")


def padded_length(length: int, cfg: PatchConfig) -> int:
    """Smallest length >= ``length`` covering whole patches."""
    if length <= cfg.patch_len:
        return cfg.patch_len
    return cfg.patch_len + math.ceil((length - cfg.patch_len) / cfg.stride) * cfg.stride


def patch_count(length: int, cfg: PatchConfig) -> int:
    return (padded_length(length, cfg) - cfg.patch_len) // cfg.stride + 1


def patchify(series: Union[Tensor, np.ndarray], cfg: PatchConfig) -> Tensor:
    """Cut ``[len x C]`` into overlapping patches, flattened channel-major.

    The tail is padded by repeating the final value. Returns ``[M x P*C]``.
    """
    series = Tensor.ensure(series)
    if series.ndim != 2 or series.shape[0] == 0:
        raise InputError(f"patchify needs a non-empty [len x channels] series, got {series.shape}")
    length, channels = series.shape
    m = patch_count(length, cfg)
    offsets = np.arange(m)[:, None] * cfg.stride + np.arange(cfg.patch_len)[None, :]
    rows = series[np.minimum(offsets, length - 1)]                      # [M, P, C]
    return rows.transpose(0, 2, 1).reshape(m, cfg.patch_len * channels)


def patch_specs(cfg: PatchConfig, channels: int, n_patches: int) -> dict[str, ParamSpec]:
    d = cfg.d_model
    specs = mlp_specs("patch", cfg.patch_len * channels, 2 * d, d)
    specs["patch.pos"] = ParamSpec((n_patches, d))
    return specs


def step_embedding(k: int, d_model: int) -> np.ndarray:
    """Sinusoidal embedding of the diffusion step ``k``."""
    half = d_model // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    emb = np.concatenate([np.sin(k * freqs), np.cos(k * freqs)])
    if d_model % 2:
        emb = np.concatenate([emb, [0.0]])
    return emb


def embed_patches(patches: Tensor, k: int, params: Mapping[str, Tensor]) -> Tensor:
    """Shared two-layer MLP per patch, plus positional and step embeddings."""
    w1 = params["patch.w1"]
    if patches.ndim != 2 or patches.shape[1] != w1.shape[0]:
        raise ShapeError(f"patches {patches.shape} do not match patch MLP input {w1.shape}")
    pos = params["patch.pos"]
    m = patches.shape[0]
    if m > pos.shape[0]:
        raise ShapeError(f"{m} patches exceed positional table of {pos.shape[0]}")
    hidden = gelu(linear(patches, w1, params["patch.b1"]))
    z = linear(hidden, params["patch.w2"], params["patch.b2"])
    return z + pos[:m] + step_embedding(k, z.shape[1])


def calendar_features(timestamps: Sequence) -> np.ndarray:
    """Per-timestamp ``[dow, dom, month, week, sin(year), cos(year)]`` features.

    The first four are scaled into ``[0, 1]``; the last two encode the
    fractional position within the year.
    """
    if isinstance(timestamps, pd.DatetimeIndex):
        index = timestamps
    else:
        values = list(timestamps)
        parsed = pd.to_datetime(pd.Series(values, dtype=object), errors="coerce", format="ISO8601")
        if parsed.isna().any():
            row = int(np.flatnonzero(parsed.isna().to_numpy())[0])
            raise InputError(f"unparseable timestamp {values[row]!r} at row {row}")
        index = pd.DatetimeIndex(parsed)
    week = index.isocalendar().week.to_numpy(dtype=np.float64)
    days_in_year = np.where(index.is_leap_year, 366.0, 365.0)
    frac = (index.dayofyear.to_numpy() - 1) / days_in_year
    return np.stack([
        index.dayofweek.to_numpy() / 6.0,
        (index.day.to_numpy() - 1) / 30.0,
        (index.month.to_numpy() - 1) / 11.0,
        np.minimum(week - 1, 52) / 52.0,
        np.sin(2 * math.pi * frac),
        np.cos(2 * math.pi * frac),
    ], axis=1)


def timestamp_specs(d_model: int) -> dict[str, ParamSpec]:
    return mlp_specs("time", CALENDAR_FEATURES, d_model, d_model)


def encode_timestamps(features: Union[np.ndarray, Tensor], params: Mapping[str, Tensor]) -> Tensor:
    """Shared two-layer MLP over calendar feature rows -> ``[N x d_model]``."""
    features = Tensor.ensure(features)
    if features.ndim != 2 or features.shape[1] != CALENDAR_FEATURES:
        raise ShapeError(f"calendar features must be [N x {CALENDAR_FEATURES}], got {features.shape}")
    hidden = gelu(linear(features, params["time.w1"], params["time.b1"]))
    return linear(hidden, params["time.w2"], params["time.b2"])
