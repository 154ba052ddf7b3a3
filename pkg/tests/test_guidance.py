"""Tests for decoupled guidance, condition dropout and null tokens."""

import numpy as np
import pytest
from pydantic import ValidationError

from diffcast.core.errors import ConfigError, ShapeError
from diffcast.diffusion import NULL_TEXT, NULL_TIME, GuidanceWeights, NullTokens, apply_condition_dropout, combine
from diffcast.numeric import Tensor


class TestCombine:
    def test_worked_example(self):
        out = combine(np.array(1.0), np.array(0.8), np.array(1.2), GuidanceWeights(w_t=0.5, w_d=0.8))
        assert float(out) == pytest.approx(0.94, abs=1e-12)

    def test_zero_weights_return_full(self, rng):
        full = rng.standard_normal((4, 2))
        out = combine(full, None, None, GuidanceWeights(w_t=0, w_d=0))
        assert np.array_equal(out, full)

    def test_equal_predictions_unchanged(self, rng):
        p = rng.standard_normal(5)
        assert np.allclose(combine(p, p, p, GuidanceWeights(w_t=3.0, w_d=-1.5)), p)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            combine(np.zeros(3), np.zeros(2), np.zeros(3), GuidanceWeights())

    def test_defaults_and_passes(self):
        w = GuidanceWeights()
        assert (w.w_t, w.w_d) == (0.5, 0.8)
        assert w.passes == 3
        assert GuidanceWeights(w_t=0, w_d=0).passes == 1

    def test_coupled_weight_is_mean(self):
        w = GuidanceWeights(w_t=0.5, w_d=0.8).coupled()
        assert w.w_t == w.w_d == pytest.approx(0.65)

    def test_non_finite_weight_rejected(self):
        with pytest.raises(ValidationError):
            GuidanceWeights(w_t=float("nan"))


class TestConditionDropout:
    def test_never_drops_at_zero(self, rng):
        masks = [apply_condition_dropout(0.0, 0.0, rng) for _ in range(1000)]
        assert not any(m.drop_time or m.drop_text for m in masks)

    def test_always_drops_at_one(self, rng):
        masks = [apply_condition_dropout(1.0, 1.0, rng) for _ in range(1000)]
        assert all(m.drop_time and m.drop_text for m in masks)

    def test_frequencies(self):
        rng = np.random.default_rng(42)
        n = 100_000
        masks = [apply_condition_dropout(0.1, 0.1, rng) for _ in range(n)]
        p_time = sum(m.drop_time for m in masks) / n
        p_text = sum(m.drop_text for m in masks) / n
        assert abs(p_time - 0.1) < 0.005
        assert abs(p_text - 0.1) < 0.005

    def test_draws_are_independent(self):
        rng = np.random.default_rng(11)
        n, p_t, p_d = 100_000, 0.3, 0.2
        masks = [apply_condition_dropout(p_t, p_d, rng) for _ in range(n)]
        observed = np.zeros((2, 2))
        for m in masks:
            observed[int(m.drop_time), int(m.drop_text)] += 1
        expected = n * np.outer([1 - p_t, p_t], [1 - p_d, p_d])
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        # 3 degrees of freedom, 0.1% critical value
        assert chi2 < 16.27

    def test_coupled_drops_both_together(self, rng):
        masks = [apply_condition_dropout(0.5, 0.0, rng, coupled=True) for _ in range(500)]
        assert all(m.drop_time == m.drop_text for m in masks)
        assert any(m.drop_time for m in masks)

    @pytest.mark.parametrize("p_t,p_d", [(-0.1, 0.1), (0.1, 1.5)])
    def test_invalid_probability(self, rng, p_t, p_d):
        with pytest.raises(ConfigError):
            apply_condition_dropout(p_t, p_d, rng)


class TestNullTokens:
    def test_broadcast_rows(self):
        params = {NULL_TIME: Tensor(np.arange(3.0).reshape(1, 3)), NULL_TEXT: Tensor(np.ones((1, 3)))}
        tokens = NullTokens(params)
        assert tokens.time(5).shape == (5, 3)
        assert np.array_equal(tokens.time(5).data[4], [0.0, 1.0, 2.0])
        assert tokens.text().shape == (1, 3)
        assert tokens.text(2).shape == (2, 3)
