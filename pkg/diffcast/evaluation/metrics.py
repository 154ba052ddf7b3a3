"""Point-forecast error metrics on arrays of any (equal) shape."""

import numpy as np

from diffcast.core.errors import ShapeError


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise ShapeError("cannot score empty arrays")
    return pred, truth


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def mse(pred, truth) -> float:
    # mean of squared deviations, not a root of anything
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def per_window_mse(pred, truth) -> np.ndarray:
    """MSE of each window along the leading axis."""
    pred, truth = _pair(pred, truth)
    return np.mean((pred - truth) ** 2, axis=tuple(range(1, pred.ndim)))
