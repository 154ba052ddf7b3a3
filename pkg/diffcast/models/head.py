"""Adaptive multi-source prediction head."""

from dataclasses import dataclass
from typing import Mapping

from diffcast.core.errors import ShapeError
from diffcast.numeric.functional import concat, gelu, linear, softmax
from diffcast.numeric.tensor import Tensor


@dataclass
class HeadOutput:
    y_hat: Tensor       # [L_out x C]
    gamma: Tensor       # [3], weights of (z, t, d) predictions
    parts: tuple[Tensor, Tensor, Tensor]


def pool_mean(x: Tensor) -> Tensor:
    """Mean over rows; ``[N x d] -> [d]``."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"pool_mean needs a non-empty [N x d] input, got {x.shape}")
    return x.mean(axis=0)


def head_forward(z: Tensor, t: Tensor, d: Tensor, params: Mapping[str, Tensor],
                 l_out: int, channels: int) -> HeadOutput:
    """Three linear forecasts from pooled ``z``, ``t`` and ``d``, mixed by a softmax gate."""
    width = l_out * channels
    if params["head.z.w"].shape[1] != width:
        raise ShapeError(f"head output width {params['head.z.w'].shape[1]} != L_out*C = {width}")
    parts = []
    for source, x in (("z", z), ("t", t), ("d", d)):
        pooled = pool_mean(x).reshape(1, x.shape[1])
        parts.append(linear(pooled, params[f"head.{source}.w"], params[f"head.{source}.b"]))
    joined = concat(parts, axis=1)
    hidden = gelu(linear(joined, params["head.fuse.w1"], params["head.fuse.b1"]))
    gamma = softmax(linear(hidden, params["head.fuse.w2"], params["head.fuse.b2"]), axis=-1)
    mixed = gamma[:, 0:1] * parts[0] + gamma[:, 1:2] * parts[1] + gamma[:, 2:3] * parts[2]
    return HeadOutput(mixed.reshape(l_out, channels), gamma.reshape(3), tuple(parts))
