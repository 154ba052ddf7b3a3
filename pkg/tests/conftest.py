"""Shared test fixtures."""

from typing import Callable, Mapping, Optional

import numpy as np
import pytest

from diffcast.core.config import RunConfig, load_run_config
from diffcast.data.dataset import PreparedDataset, load_source, prepare_dataset
from diffcast.numeric.tensor import Tensor, backward, no_grad

# small enough that a full fit + evaluation takes seconds
TINY_OVERRIDES = {
    "seed": 0,
    "synthetic.length": 120,
    "synthetic.frequency": "weekly",
    "synthetic.event_rate": 0.1,
    "data.l_in": 8,
    "data.l_out": 4,
    "data.lookback_intervals": 4,
    "model.d_model": 8,
    "model.patch_len": 4,
    "model.stride": 2,
    "model.layers": 2,
    "model.heads": 2,
    "model.head_hidden": 8,
    "model.text_vocab": 32,
    "diffusion.k_steps": 10,
    "diffusion.inference_steps": 5,
    "train.steps": 4,
    "train.batch_size": 4,
    "train.val_every": 2,
    "train.val_windows": 3,
    "train.patience": 5,
    "train.progress": False,
    "eval.seeds": [0],
    "eval.max_windows": 3,
}


def gradient_check(loss_fn: Callable[[], Tensor], tensors: Mapping[str, Tensor], step: float = 1e-4,
                   max_entries: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> float:
    """Largest relative error between autodiff and central finite differences.

    ``loss_fn`` must read the current ``.data`` of ``tensors`` on every call.
    With ``max_entries`` only that many randomly chosen entries per tensor
    are perturbed.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for t in tensors.values():
        t.zero_grad()
    backward(loss_fn())
    worst = 0.0
    for t in tensors.values():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        indices = list(np.ndindex(t.shape))
        if max_entries is not None and len(indices) > max_entries:
            picks = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in picks]
        for idx in indices:
            original = t.data[idx]
            with no_grad():
                t.data[idx] = original + step
                plus = loss_fn().item()
                t.data[idx] = original - step
                minus = loss_fn().item()
            t.data[idx] = original
            numeric = (plus - minus) / (2 * step)
            a = float(analytic[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
            worst = max(worst, err)
    return worst


@pytest.fixture()
def grad_check():
    return gradient_check


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def tiny_config() -> RunConfig:
    return load_run_config(None, TINY_OVERRIDES)


@pytest.fixture()
def tiny_dataset(tiny_config) -> PreparedDataset:
    source = load_source(tiny_config.data, tiny_config.synthetic)
    return prepare_dataset(source, tiny_config.data)
