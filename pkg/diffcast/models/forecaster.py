"""Conditional denoiser: encoders -> fusion -> head, with learned null conditions."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from diffcast.core.errors import ShapeError
from diffcast.data.reports import TextContext
from diffcast.data.windows import WindowSample
from diffcast.diffusion.guidance import NULL_TEXT, NULL_TIME, NullTokens
from diffcast.models.encoders import (
    PatchConfig,
    calendar_features,
    embed_patches,
    encode_timestamps,
    patch_count,
    patch_specs,
    patchify,
    timestamp_specs,
)
from diffcast.models.fusion import FusionConfig, fuse_stack
from diffcast.models.head import head_forward
from diffcast.models.params import ModelParams, ParamSpec, fusion_layer_specs, head_specs
from diffcast.models.text import BaseTextEncoder, create_text_encoder
from diffcast.numeric.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class Conditions:
    """Everything the denoiser sees besides the noisy target."""
    history: np.ndarray                 # [L_in x C], normalized
    calendar: np.ndarray                # [(L_in + L_out) x 6]
    text: TextContext = field(default_factory=TextContext)

    @classmethod
    def from_window(cls, window: WindowSample) -> "Conditions":
        return cls(window.x, calendar_features(window.timestamps), window.text)


@dataclass
class Example:
    conditions: Conditions
    target: np.ndarray
    sample_id: int


def examples_from_windows(windows: Sequence[WindowSample]) -> list[Example]:
    return [Example(Conditions.from_window(w), w.y, w.start) for w in windows]


class DiffusionForecaster:
    """Predicts the clean target ``[L_out x C]`` from a noisy one and its conditions."""

    def __init__(self, config, l_in: int, l_out: int, channels: int,
                 rng: Optional[np.random.Generator] = None,
                 text_encoder: Optional[BaseTextEncoder] = None):
        self.config = config
        self.l_in = l_in
        self.l_out = l_out
        self.channels = channels
        self.patch_config = PatchConfig(config.patch_len, config.stride, config.d_model)
        self.fusion_config = FusionConfig(
            layers=config.layers, heads=config.heads, d_model=config.d_model,
            lam=config.lam, mode=config.fusion_mode, ln_eps=config.ln_eps,
        )
        self.text_encoder = text_encoder or create_text_encoder(config)
        self.n_patches = patch_count(l_in + l_out, self.patch_config)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = ModelParams.initialize(self.param_specs(), rng, std=config.init_std)
        self.null_tokens = NullTokens(self.params)

    @property
    def target_shape(self) -> tuple[int, int]:
        return self.l_out, self.channels

    def param_specs(self) -> dict[str, ParamSpec]:
        d = self.config.d_model
        specs = patch_specs(self.patch_config, self.channels, self.n_patches)
        specs.update(timestamp_specs(d))
        specs.update(self.text_encoder.param_specs(d))
        specs[NULL_TIME] = ParamSpec((1, d))
        specs[NULL_TEXT] = ParamSpec((1, d))
        for layer in range(self.config.layers):
            specs.update(fusion_layer_specs(layer, d, self.config.fusion_mode))
        specs.update(head_specs(d, self.l_out * self.channels, self.config.head_hidden))
        return specs

    def forward(self, y_k: np.ndarray, k: int, conditions: Conditions, *, drop_time: bool = False,
                drop_text: bool = False, trace: Optional[list] = None) -> Tensor:
        """Differentiable prediction of the clean target."""
        y_k = np.asarray(y_k, dtype=np.float64)
        if y_k.shape != self.target_shape:
            raise ShapeError(f"noisy target shape {y_k.shape} != {self.target_shape}")
        if conditions.history.shape != (self.l_in, self.channels):
            raise ShapeError(f"history shape {conditions.history.shape} != {(self.l_in, self.channels)}")

        series = np.concatenate([conditions.history, y_k], axis=0)
        z = embed_patches(patchify(series, self.patch_config), k, self.params)

        n_time = self.l_in + self.l_out
        if drop_time or not self.config.use_timestamps:
            t = self.null_tokens.time(n_time)
        else:
            t = encode_timestamps(conditions.calendar, self.params)
        if drop_text or not self.config.use_text:
            d = self.null_tokens.text()
        else:
            d = self.text_encoder.encode(conditions.text, self.params)

        z = fuse_stack(z, t, d, self.fusion_config, self.params, trace=trace)
        return head_forward(z, t, d, self.params, self.l_out, self.channels).y_hat

    def denoise(self, y_k: np.ndarray, k: int, conditions: Conditions, *, drop_time: bool = False,
                drop_text: bool = False, trace: Optional[list] = None) -> np.ndarray:
        """Inference-only prediction without graph recording."""
        with no_grad():
            return self.forward(y_k, k, conditions, drop_time=drop_time,
                                drop_text=drop_text, trace=trace).data

    def quantize_float32(self) -> None:
        self.params.quantize_float32()
