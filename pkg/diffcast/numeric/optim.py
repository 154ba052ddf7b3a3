"""Adam optimizer and global-norm gradient clipping."""

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from diffcast.core.errors import NonFiniteError, ShapeError
from diffcast.numeric.tensor import Tensor


@dataclass
class OptimizerState:
    """Per-parameter moment buffers plus Adam hyperparameters."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def scalars(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "step": self.step,
        }


def clip_grad_norm(
    grads: Mapping[str, np.ndarray], max_norm: Optional[float]
) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns:
        (clipped gradients, norm before clipping)
    """
    total = float(np.sqrt(sum(float((g ** 2).sum()) for g in grads.values())))
    if max_norm is None or max_norm <= 0 or total <= max_norm:
        return dict(grads), total
    scale = max_norm / (total + 1e-6)
    return {name: g * scale for name, g in grads.items()}, total


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
) -> OptimizerState:
    """Apply one bias-corrected Adam update in place.

    Parameters without an entry in ``grads`` see a zero gradient. The whole
    step is aborted before any update if a gradient is non-finite.

    Raises:
        NonFiniteError: naming the first parameter with a NaN/Inf gradient.
        ShapeError: if a gradient does not match its parameter.
    """
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter {name!r} {params[name].shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - state.beta1) * g if m is None else state.beta1 * m + (1 - state.beta1) * g
        v = (1 - state.beta2) * g * g if v is None else state.beta2 * v + (1 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state


class Adam:
    """Stateful wrapper binding a parameter set to an :class:`OptimizerState`."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.state = OptimizerState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def gradients(self) -> dict[str, np.ndarray]:
        return {name: p.grad for name, p in self.params.items() if p.grad is not None}

    def step(self, grads: Optional[Mapping[str, np.ndarray]] = None) -> None:
        adam_step(self.params, self.gradients() if grads is None else grads, self.state)
