"""Minimal dense-tensor kernel: autodiff tensor, NN ops, Adam."""

from .tensor import ComputationTape, Tensor, backward, grad_enabled, no_grad
from .functional import concat, gelu, layer_norm, linear, matmul, mean, mse, relu, softmax, transpose
from .optim import Adam, OptimizerState, adam_step, clip_grad_norm

__all__ = [
    "Tensor",
    "ComputationTape",
    "backward",
    "no_grad",
    "grad_enabled",
    "matmul",
    "softmax",
    "layer_norm",
    "gelu",
    "relu",
    "concat",
    "mean",
    "transpose",
    "mse",
    "linear",
    "Adam",
    "OptimizerState",
    "adam_step",
    "clip_grad_norm",
]
