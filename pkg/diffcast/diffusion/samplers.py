"""DDPM / DDIM reverse steps and the guided sampling loop."""

import math
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Protocol

import numpy as np

from diffcast.core.errors import ConfigError, ContractError, NonFiniteError, ShapeError
from diffcast.diffusion.guidance import GuidanceWeights, combine
from diffcast.diffusion.schedule import NoiseSchedule, _as_array, posterior_mean

_DDIM_GUARD = 1.0 - 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    kind: Literal["ddim", "ddpm"] = "ddim"
    num_inference_steps: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ddim", "ddpm"):
            raise ConfigError(f"unknown sampler kind {self.kind!r}; expected 'ddim' or 'ddpm'")
        if self.num_inference_steps < 1:
            raise ConfigError("num_inference_steps must be >= 1")


class Denoiser(Protocol):
    """Anything that predicts the clean target from a noisy one."""

    target_shape: tuple[int, int]

    def denoise(self, y_k: np.ndarray, k: int, conditions: Any, *, drop_time: bool = False,
                drop_text: bool = False, trace: Optional[list] = None) -> np.ndarray: ...


@dataclass
class SampleResult:
    forecast: np.ndarray
    passes: int
    steps: list[int]
    trace: Optional[list] = field(default=None, repr=False)


def inference_timesteps(K: int, n: int) -> list[int]:
    """Evenly spaced, strictly increasing steps from ``{1..K}`` ending at ``K``."""
    if not 1 <= n <= K:
        raise ConfigError(f"num_inference_steps must be within 1..{K}, got {n}")
    if n == 1:
        return [K]
    return [int(s) for s in np.unique(np.round(np.linspace(1, K, n)).astype(int))]


def ddpm_step(y_k, y_hat, k: int, schedule: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    """Ancestral step: posterior mean plus ``sigma_k`` noise (none at ``k == 1``)."""
    mu = posterior_mean(y_k, y_hat, k, schedule)
    sigma = schedule.sigma(k)
    if sigma == 0.0:
        return mu
    return mu + sigma * rng.standard_normal(mu.shape)


def predicted_noise(y_k, y_hat, alpha_bar_k: float) -> np.ndarray:
    if alpha_bar_k >= _DDIM_GUARD:
        raise ContractError(f"cannot invert noise at alpha_bar={alpha_bar_k!r}")
    y_k, y_hat = _as_array(y_k), _as_array(y_hat)
    return (y_k - math.sqrt(alpha_bar_k) * y_hat) / math.sqrt(1.0 - alpha_bar_k)


def ddim_update(y_k, y_hat, alpha_bar_k: float, alpha_bar_prev: float) -> np.ndarray:
    """Deterministic (eta = 0) jump between two cumulative retention levels."""
    eps_hat = predicted_noise(y_k, y_hat, alpha_bar_k)
    y_hat = _as_array(y_hat)
    return math.sqrt(alpha_bar_prev) * y_hat + math.sqrt(1.0 - alpha_bar_prev) * eps_hat


def ddim_step(y_k, y_hat, k: int, k_prev: int, schedule: NoiseSchedule) -> np.ndarray:
    y_k, y_hat = _as_array(y_k), _as_array(y_hat)
    if y_k.shape != y_hat.shape:
        raise ShapeError(f"ddim_step shape mismatch: {y_k.shape} vs {y_hat.shape}")
    if not 0 <= k_prev < k:
        raise ContractError(f"ddim_step needs 0 <= k_prev < k, got k={k}, k_prev={k_prev}")
    return ddim_update(y_k, y_hat, schedule.alpha_bar(k), schedule.alpha_bar(k_prev))


def guided_prediction(model: Denoiser, y_k: np.ndarray, k: int, conditions: Any,
                      guidance: GuidanceWeights, trace: Optional[list] = None) -> tuple[np.ndarray, int]:
    """Run the full pass plus one null pass per nonzero weight, then combine."""
    full = model.denoise(y_k, k, conditions, trace=trace)
    no_t = model.denoise(y_k, k, conditions, drop_time=True) if guidance.w_t != 0 else None
    no_d = model.denoise(y_k, k, conditions, drop_text=True) if guidance.w_d != 0 else None
    return combine(full, no_t, no_d, guidance), guidance.passes


def sample(model: Denoiser, conditions: Any, schedule: NoiseSchedule, sampler_cfg: SamplerConfig,
           guidance: GuidanceWeights, rng: Optional[np.random.Generator] = None,
           capture_trace: bool = False) -> SampleResult:
    """Denoise from seeded Gaussian noise down to a normalized forecast.

    DDIM walks the evenly spaced inference subsequence and finishes at
    ``alpha_bar = 1``; DDPM always walks every step ``K .. 1``. The attention
    trace, when requested, is taken from the full pass of the last step.
    """
    rng = rng if rng is not None else np.random.default_rng(sampler_cfg.seed)
    y = rng.standard_normal(model.target_shape)
    if sampler_cfg.kind == "ddim":
        steps = inference_timesteps(schedule.K, min(sampler_cfg.num_inference_steps, schedule.K))
    else:
        steps = list(range(1, schedule.K + 1))

    passes = 0
    trace = None
    descending = steps[::-1]
    for i, k in enumerate(descending):
        last = i == len(descending) - 1
        step_trace = [] if capture_trace and last else None
        y_hat, n = guided_prediction(model, y, k, conditions, guidance, trace=step_trace)
        passes += n
        if step_trace is not None:
            trace = step_trace
        if sampler_cfg.kind == "ddim":
            k_prev = 0 if last else descending[i + 1]
            y = ddim_step(y, y_hat, k, k_prev, schedule)
        else:
            y = ddpm_step(y, y_hat, k, schedule, rng)
        if not np.all(np.isfinite(y)):
            raise NonFiniteError(f"sampler state became non-finite at step k={k}")
    return SampleResult(forecast=y, passes=passes, steps=steps, trace=trace)
