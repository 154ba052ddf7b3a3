"""Tests for the noise schedule, forward noising and the posterior mean."""

import math

import numpy as np
import pytest

from diffcast.core.errors import ConfigError, ContractError, ShapeError
from diffcast.diffusion import (
    NoiseSchedule,
    forward_noise,
    make_quadratic_schedule,
    posterior_coefficients,
    posterior_mean,
)


class TestQuadraticSchedule:
    def test_default_length_and_decay(self):
        s = make_quadratic_schedule(200)
        assert s.K == 200
        assert np.all(np.diff(s.alpha_bars) < 0)
        assert s.alpha_bar(200) < 0.01

    def test_single_step(self):
        s = make_quadratic_schedule(1, beta_start=1e-4, beta_end=0.1)
        assert s.K == 1
        assert s.alpha_bar(1) == pytest.approx(1 - 1e-4)

    def test_betas_are_quadratic(self):
        s = make_quadratic_schedule(5, 0.01, 0.09)
        roots = np.sqrt(s.betas)
        assert np.allclose(np.diff(roots), 0.05)

    def test_cumulative_ratio_is_step_retention(self):
        s = make_quadratic_schedule(200)
        assert s.alpha_bar(1) == pytest.approx(float(s.alphas[0]), rel=1e-12)
        ratios = np.array([s.alpha_bar(k) / s.alpha_bar(k - 1) for k in range(2, 201)])
        assert np.allclose(ratios, s.alphas[1:], rtol=1e-12, atol=0)

    @pytest.mark.parametrize("start,end", [(0.0, 0.1), (0.2, 0.1), (0.1, 1.0)])
    def test_invalid_range(self, start, end):
        with pytest.raises(ConfigError):
            make_quadratic_schedule(10, start, end)

    def test_zero_steps(self):
        with pytest.raises(ConfigError):
            make_quadratic_schedule(0)

    def test_step_bounds(self):
        s = make_quadratic_schedule(10)
        assert s.alpha_bar(0) == 1.0
        assert s.sigma(1) == 0.0
        with pytest.raises(ContractError):
            s.alpha_bar(11)
        with pytest.raises(ContractError):
            s.check_step(0)

    def test_from_alpha_bars_rejects_increase(self):
        with pytest.raises(ConfigError):
            NoiseSchedule.from_alpha_bars([0.5, 0.6])


class TestForwardNoise:
    def test_worked_example(self):
        s = NoiseSchedule.from_alpha_bars([0.25])
        out = forward_noise(np.array([1.0, 0.0]), 1, s, np.array([0.0, 1.0]))
        assert np.allclose(out, [0.5, 0.866025], atol=1e-6)

    def test_near_clean_limit(self):
        s = NoiseSchedule.from_alpha_bars([1 - 1e-14])
        y = np.array([0.3, -1.2])
        assert np.allclose(forward_noise(y, 1, s, np.ones(2)), y, atol=1e-6)

    def test_monte_carlo_moments(self):
        s = make_quadratic_schedule(50)
        k, n, y = 20, 10_000, 2.0
        ab = s.alpha_bar(k)
        eps = np.random.default_rng(7).standard_normal(n)
        samples = forward_noise(np.full(n, y), k, s, eps)
        mean_tol = 3 * math.sqrt(1 - ab) / math.sqrt(n)
        var_tol = 3 * (1 - ab) * math.sqrt(2 / n)
        assert abs(samples.mean() - math.sqrt(ab) * y) < mean_tol
        assert abs(samples.var() - (1 - ab)) < var_tol

    def test_shape_mismatch(self):
        s = make_quadratic_schedule(5)
        with pytest.raises(ShapeError):
            forward_noise(np.zeros(3), 1, s, np.zeros(2))

    def test_k_zero_is_contract_error(self):
        with pytest.raises(ContractError):
            forward_noise(np.zeros(2), 0, make_quadratic_schedule(5), np.zeros(2))


class TestPosteriorMean:
    def test_first_step_returns_prediction(self):
        s = make_quadratic_schedule(10)
        y_hat = np.array([0.25, -3.0])
        assert np.array_equal(posterior_mean(np.array([9.0, 9.0]), y_hat, 1, s), y_hat)

    def test_equal_retention_returns_noisy_input(self):
        c_noisy, c_clean = posterior_coefficients(0.3, 0.3)
        assert c_noisy == pytest.approx(1.0, abs=1e-15)
        assert c_clean == 0.0

    def test_worked_example(self):
        s = NoiseSchedule.from_alpha_bars([0.5, 0.25])
        out = posterior_mean(np.array([1.0]), np.array([2.0]), 2, s)
        assert out[0] == pytest.approx(1.414214, abs=1e-6)

    def test_snr_decreasing(self):
        assert np.all(np.diff(make_quadratic_schedule(30).snr()) < 0)
