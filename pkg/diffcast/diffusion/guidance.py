"""Decoupled classifier-free guidance and training-time condition dropout."""

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from diffcast.core.errors import ConfigError, ShapeError
from diffcast.numeric.tensor import Tensor

NULL_TIME = "null.time"
NULL_TEXT = "null.text"


class GuidanceWeights(BaseModel):
    """Inference-time guidance scales for the timestamp and text conditions."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    w_t: float = 0.5
    w_d: float = 0.8

    @field_validator("w_t", "w_d")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("guidance weight must be finite")
        return value

    @property
    def passes(self) -> int:
        """Network passes per denoising step."""
        return 1 + (self.w_t != 0) + (self.w_d != 0)

    def coupled(self) -> "GuidanceWeights":
        """Single shared weight applied to both conditions."""
        w = (self.w_t + self.w_d) / 2
        return GuidanceWeights(w_t=w, w_d=w)


def combine(pred_full, pred_no_t, pred_no_d, w: GuidanceWeights) -> np.ndarray:
    """``full + w_t (full - no_t) + w_d (full - no_d)``.

    A prediction whose weight is zero is never read and may be ``None``.
    """
    full = np.asarray(pred_full, dtype=np.float64)
    out = full.copy()
    for weight, other, label in ((w.w_t, pred_no_t, "no_t"), (w.w_d, pred_no_d, "no_d")):
        if weight == 0:
            continue
        other = np.asarray(other, dtype=np.float64)
        if other.shape != full.shape:
            raise ShapeError(f"guidance {label} shape {other.shape} != full shape {full.shape}")
        out = out + weight * (full - other)
    return out


@dataclass(frozen=True)
class ConditionMask:
    drop_time: bool = False
    drop_text: bool = False


def _check_probability(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name} must be within [0, 1], got {p}")


def apply_condition_dropout(p_t: float, p_d: float, rng: np.random.Generator,
                            coupled: bool = False) -> ConditionMask:
    """Draw which conditions one training example loses to its null token.

    The two draws are independent unless ``coupled``, in which case a single
    draw with probability ``p_t`` drops both. History is never dropped.
    """
    _check_probability("p_uncond_t", p_t)
    _check_probability("p_uncond_d", p_d)
    if coupled:
        drop = bool(rng.random() < p_t)
        return ConditionMask(drop, drop)
    u = rng.random(2)
    return ConditionMask(bool(u[0] < p_t), bool(u[1] < p_d))


class NullTokens:
    """View over the learned null embeddings of a parameter set."""

    def __init__(self, params: Mapping[str, Tensor]):
        self._params = params

    def time(self, length: int) -> Tensor:
        """The null timestamp row broadcast to ``length`` rows."""
        row = self._params[NULL_TIME]
        return row.broadcast_to((length, row.shape[-1]))

    def text(self, length: Optional[int] = None) -> Tensor:
        row = self._params[NULL_TEXT]
        return row if length is None else row.broadcast_to((length, row.shape[-1]))
