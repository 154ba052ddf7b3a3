"""Differentiable neural-network ops over :class:`Tensor`."""

import math
from typing import Sequence

import numpy as np

from diffcast.core.errors import ShapeError
from diffcast.numeric.tensor import Tensor

_GELU_C = math.sqrt(2.0 / math.pi)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor.ensure(a).matmul(b)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(x.data * mask, (x,), "relu", lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    th = np.tanh(inner)

    def backward(g):
        sech2 = 1.0 - th ** 2
        d = 0.5 * (1.0 + th) + 0.5 * v * sech2 * _GELU_C * (1.0 + 3 * 0.044715 * v ** 2)
        return (g * d,)

    return Tensor.from_op(0.5 * v * (1.0 + th), (x,), "gelu", backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < max(x.ndim, 1):
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(y, (x,), "softmax", backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gain`` and shift by ``bias``."""
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(
            f"layer_norm gain/bias must be ({width},), got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv

    def backward(g):
        dxhat = g * gain.data
        dx = (inv / width) * (
            width * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor.from_op(xhat * gain.data + bias.data, (x, gain, bias), "layer_norm", backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [Tensor.ensure(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax
        ):
            raise ShapeError(
                f"concat shape mismatch on axis {axis}: {[t.shape for t in tensors]}"
            )
    splits = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=ax))

    return Tensor.from_op(
        np.concatenate([t.data for t in tensors], axis=ax), tensors, "concat", backward
    )


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return x.mean(axis=axis, keepdims=keepdims)


def transpose(x: Tensor, *axes) -> Tensor:
    return x.transpose(*axes)


def mse(a: Tensor, b) -> Tensor:
    """Scalar mean squared error."""
    b = Tensor.ensure(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size

    def backward(g):
        grad = (2.0 / n) * diff * g
        return grad, -grad

    return Tensor.from_op(np.array((diff ** 2).mean()), (a, b), "mse", backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = x.matmul(weight)
    return out if bias is None else out + bias
