"""Tests for the assembled conditional denoiser."""

import numpy as np
import pandas as pd
import pytest

from diffcast.core.config import ModelConfig
from diffcast.core.errors import ShapeError
from diffcast.data.reports import Report, TextContext, sort_reports
from diffcast.models.encoders import calendar_features
from diffcast.models.forecaster import Conditions, DiffusionForecaster
from diffcast.numeric import mse

L_IN, L_OUT, CHANNELS = 8, 4, 2


def small_config(**kwargs):
    base = dict(d_model=8, patch_len=4, stride=2, layers=2, heads=2, head_hidden=8, text_vocab=32, init_std=0.5)
    base.update(kwargs)
    return ModelConfig(**base)


def make_model(**kwargs):
    return DiffusionForecaster(small_config(**kwargs), L_IN, L_OUT, CHANNELS, rng=np.random.default_rng(3))


def text(*items):
    return TextContext(tuple(sort_reports(Report(start="2024-01-01", end="2024-01-03", text=t) for t in items)))


@pytest.fixture()
def conditions(rng):
    stamps = pd.date_range("2024-01-01", periods=L_IN + L_OUT, freq="D")
    return Conditions(rng.standard_normal((L_IN, CHANNELS)), calendar_features(stamps), text("flu season begins"))


@pytest.fixture()
def y_k(rng):
    return rng.standard_normal((L_OUT, CHANNELS))


class TestForecaster:
    def test_output_shape(self, conditions, y_k):
        model = make_model()
        assert model.target_shape == (L_OUT, CHANNELS)
        assert model.forward(y_k, 5, conditions).shape == (L_OUT, CHANNELS)

    def test_parameter_names(self):
        names = set(make_model().params)
        for expected in ("patch.w1", "patch.pos", "time.w1", "text.table", "null.time", "null.text",
                         "fusion.0.attn.wq", "fusion.1.ln2.gain", "head.z.w", "head.fuse.w2"):
            assert expected in names

    def test_dropping_conditions_changes_prediction(self, conditions, y_k):
        model = make_model()
        full = model.denoise(y_k, 5, conditions)
        assert not np.allclose(full, model.denoise(y_k, 5, conditions, drop_time=True))
        assert not np.allclose(full, model.denoise(y_k, 5, conditions, drop_text=True))

    def test_disabled_text_ignores_reports(self, conditions, y_k):
        model = make_model(use_text=False)
        other = Conditions(conditions.history, conditions.calendar, text("holiday traffic"))
        assert np.array_equal(model.denoise(y_k, 5, conditions), model.denoise(y_k, 5, other))
        assert np.array_equal(model.denoise(y_k, 5, conditions),
                              model.denoise(y_k, 5, conditions, drop_text=True))

    def test_disabled_timestamps_use_null_token(self, conditions, y_k):
        model = make_model(use_timestamps=False)
        shifted = Conditions(conditions.history, conditions.calendar[::-1].copy(), conditions.text)
        assert np.array_equal(model.denoise(y_k, 5, conditions), model.denoise(y_k, 5, shifted))

    def test_empty_text_matches_dropped_text(self, conditions, y_k):
        model = make_model()
        empty = Conditions(conditions.history, conditions.calendar)
        assert np.array_equal(model.denoise(y_k, 5, empty), model.denoise(y_k, 5, conditions, drop_text=True))

    def test_denoise_matches_forward_without_graph(self, conditions, y_k):
        model = make_model()
        out = model.denoise(y_k, 3, conditions)
        assert isinstance(out, np.ndarray)
        assert np.array_equal(out, model.forward(y_k, 3, conditions).data)

    def test_trace_rows_sum_to_one(self, conditions, y_k):
        model = make_model()
        trace = []
        model.denoise(y_k, 2, conditions, trace=trace)
        assert len(trace) == 2
        for entry in trace:
            assert np.allclose(entry.weights.sum(axis=-1), 1.0, atol=1e-6)
            assert entry.columns.n_time == L_IN + L_OUT

    @pytest.mark.parametrize("bad", ["target", "history"])
    def test_shape_errors(self, conditions, y_k, bad):
        model = make_model()
        if bad == "target":
            y_k = np.zeros((L_OUT + 1, CHANNELS))
        else:
            conditions = Conditions(np.zeros((L_IN, CHANNELS + 1)), conditions.calendar, conditions.text)
        with pytest.raises(ShapeError):
            model.forward(y_k, 1, conditions)

    @pytest.mark.parametrize("mode", ["unified", "sequential", "simple"])
    def test_end_to_end_gradients(self, conditions, y_k, rng, grad_check, mode):
        model = make_model(fusion_mode=mode)
        target = rng.standard_normal((L_OUT, CHANNELS))
        loss = lambda: mse(model.forward(y_k, 4, conditions), target)
        assert grad_check(loss, dict(model.params), max_entries=3) < 1e-4
