"""Tests for checkpoint save/load."""

import numpy as np
import pytest

from diffcast.core.errors import CheckpointError
from diffcast.data.series import NormStats
from diffcast.models.forecaster import DiffusionForecaster, examples_from_windows
from diffcast.numeric import Adam
from diffcast.training.checkpoint import checkpoint_from_model, load_checkpoint, save_checkpoint
from diffcast.utils.container import write_container


@pytest.fixture()
def model(tiny_config, tiny_dataset):
    return DiffusionForecaster(tiny_config.model, tiny_config.data.l_in, tiny_config.data.l_out,
                               tiny_dataset.channels, rng=np.random.default_rng(0))


class TestCheckpoint:
    def test_forward_identical_after_reload(self, tmp_path, model, tiny_config, tiny_dataset):
        model.quantize_float32()
        stats = NormStats(mean=np.array([1.0]), std=np.array([2.0]))
        path = save_checkpoint(checkpoint_from_model(model, tiny_config, step=4, stats=stats), tmp_path / "c.undf")

        loaded = load_checkpoint(path)
        assert loaded.step == 4
        assert loaded.config == tiny_config
        assert loaded.stats.mean.tolist() == [1.0]
        restored = loaded.build_model()

        example = examples_from_windows(tiny_dataset.split("test"))[0]
        y_k = np.random.default_rng(1).standard_normal(model.target_shape)
        a = model.denoise(y_k, 3, example.conditions)
        b = restored.denoise(y_k, 3, example.conditions)
        assert np.array_equal(a, b)

    def test_optimizer_moments_round_trip(self, tmp_path, model, tiny_config):
        optimizer = Adam(model.params)
        optimizer.step({name: np.ones(t.shape) for name, t in model.params.items()})
        rng = np.random.default_rng(11)
        rng.random()
        ckpt = checkpoint_from_model(model, tiny_config, step=1, optimizer=optimizer.state, rng=rng)
        loaded = load_checkpoint(save_checkpoint(ckpt, tmp_path / "c.undf"))
        assert loaded.optimizer.step == 1
        assert loaded.optimizer.lr == optimizer.state.lr
        name = "patch.w1"
        assert np.allclose(loaded.optimizer.m[name], optimizer.state.m[name], atol=1e-7)
        restored = np.random.default_rng()
        restored.bit_generator.state = loaded.rng_state
        assert restored.random() == rng.random()

    def test_truncated_file(self, tmp_path, model, tiny_config):
        path = save_checkpoint(checkpoint_from_model(model, tiny_config), tmp_path / "c.undf")
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_mismatched_model(self, tmp_path, model, tiny_config, tiny_dataset):
        path = save_checkpoint(checkpoint_from_model(model, tiny_config), tmp_path / "c.undf")
        ckpt = load_checkpoint(path)
        ckpt.config = tiny_config.with_overrides({"model.d_model": 16})
        with pytest.raises(CheckpointError, match="does not fit"):
            ckpt.build_model()

    def test_not_a_checkpoint(self, tmp_path):
        path = write_container(tmp_path / "t.undf", {"w": np.ones(1)}, {"kind": "attention-trace"})
        with pytest.raises(CheckpointError, match="not a checkpoint"):
            load_checkpoint(path)
