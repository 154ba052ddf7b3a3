"""Noise schedule, forward noising and the reverse-step posterior mean.

Steps are 1-based: ``k`` ranges over ``1..K`` and ``alpha_bar(0) == 1``.
Arrays on :class:`NoiseSchedule` are stored 0-based (index ``k - 1``).
"""

import math
from dataclasses import dataclass

import numpy as np

from diffcast.core.errors import ConfigError, ContractError, ShapeError
from diffcast.numeric.tensor import Tensor


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step retention ``alpha``, cumulative ``alpha_bars`` and reverse variances."""
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigma2: np.ndarray

    @property
    def K(self) -> int:
        return len(self.alphas)

    @classmethod
    def from_alpha_bars(cls, alpha_bars) -> "NoiseSchedule":
        """Build a schedule from explicit cumulative retention factors."""
        alpha_bars = np.asarray(alpha_bars, dtype=np.float64)
        if alpha_bars.ndim != 1 or len(alpha_bars) == 0:
            raise ConfigError("alpha_bars must be a non-empty 1-d sequence")
        previous = np.concatenate([[1.0], alpha_bars[:-1]])
        alphas = alpha_bars / previous
        if np.any(alphas <= 0) or np.any(alphas >= 1):
            raise ConfigError("alpha_bars must be strictly decreasing within (0, 1)")
        betas = 1.0 - alphas
        return cls(betas, alphas, alpha_bars, _posterior_variance(betas, alpha_bars))

    def check_step(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise ContractError(f"diffusion step {k} outside 1..{self.K}")

    def alpha_bar(self, k: int) -> float:
        """Cumulative retention at step ``k``; ``alpha_bar(0) == 1``."""
        if k == 0:
            return 1.0
        self.check_step(k)
        return float(self.alpha_bars[k - 1])

    def sigma(self, k: int) -> float:
        self.check_step(k)
        return 0.0 if k == 1 else math.sqrt(float(self.sigma2[k - 1]))

    def snr(self) -> np.ndarray:
        return self.alpha_bars / (1.0 - self.alpha_bars)


def _posterior_variance(betas: np.ndarray, alpha_bars: np.ndarray) -> np.ndarray:
    previous = np.concatenate([[1.0], alpha_bars[:-1]])
    return betas * (1.0 - previous) / (1.0 - alpha_bars)


def make_quadratic_schedule(K: int, beta_start: float = 1e-4, beta_end: float = 0.1) -> NoiseSchedule:
    """Betas are the square of an arithmetic sequence from sqrt(beta_start) to sqrt(beta_end)."""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if not 0 < beta_start <= beta_end < 1:
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if K == 1:
        betas = np.array([beta_start])
    else:
        frac = np.arange(K) / (K - 1)
        betas = (math.sqrt(beta_start) + frac * (math.sqrt(beta_end) - math.sqrt(beta_start))) ** 2
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    return NoiseSchedule(betas, alphas, alpha_bars, _posterior_variance(betas, alpha_bars))


def forward_noise(y, k: int, schedule: NoiseSchedule, eps) -> np.ndarray:
    """Sample ``y_k = sqrt(ab_k) * y + sqrt(1 - ab_k) * eps``."""
    y, eps = _as_array(y), _as_array(eps)
    if y.shape != eps.shape:
        raise ShapeError(f"noise shape {eps.shape} does not match target shape {y.shape}")
    schedule.check_step(k)
    ab = schedule.alpha_bar(k)
    return math.sqrt(ab) * y + math.sqrt(1.0 - ab) * eps


def posterior_coefficients(alpha_bar_k: float, alpha_bar_prev: float) -> tuple[float, float]:
    """Weights of ``y_k`` and of the clean prediction in the posterior mean."""
    denom = math.sqrt(alpha_bar_prev) * (1.0 - alpha_bar_k)
    c_noisy = math.sqrt(alpha_bar_k) * (1.0 - alpha_bar_prev) / denom
    c_clean = (alpha_bar_prev - alpha_bar_k) / denom
    return c_noisy, c_clean


def posterior_mean(y_k, y_hat, k: int, schedule: NoiseSchedule) -> np.ndarray:
    y_k, y_hat = _as_array(y_k), _as_array(y_hat)
    if y_k.shape != y_hat.shape:
        raise ShapeError(f"posterior_mean shape mismatch: {y_k.shape} vs {y_hat.shape}")
    schedule.check_step(k)
    c_noisy, c_clean = posterior_coefficients(schedule.alpha_bar(k), schedule.alpha_bar(k - 1))
    return c_noisy * y_k + c_clean * y_hat
