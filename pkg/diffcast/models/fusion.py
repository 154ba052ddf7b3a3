"""Cross-attention fusion of patch embeddings with timestamp and text context.

Three modes share one layer skeleton (attend, residual + norm, FFN, residual + norm):

* ``unified``: one cross-attention per layer over ``concat(lam * t, d)``.
* ``sequential``: attend to ``lam * t``, then to ``d``, each with its own
  residual + norm.
* ``simple``: no attention; mean-pooled ``t`` and ``d`` are concatenated to
  every patch row and projected back to ``d_model``.
"""

import math
from dataclasses import dataclass
from typing import Literal, Mapping, Optional

import numpy as np

from diffcast.core.errors import ConfigError, NonFiniteError, ShapeError
from diffcast.numeric.functional import concat, gelu, layer_norm, linear, softmax
from diffcast.numeric.tensor import Tensor

FusionMode = Literal["unified", "sequential", "simple"]


@dataclass(frozen=True)
class FusionConfig:
    layers: int = 2
    heads: int = 4
    d_model: int = 64
    lam: float = 1.0
    mode: FusionMode = "unified"
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.mode not in ("unified", "sequential", "simple"):
            raise ConfigError(f"unknown fusion mode {self.mode!r}")
        if self.heads < 1 or self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.layers < 0:
            raise ConfigError("layers must be >= 0")


@dataclass(frozen=True)
class ContextColumns:
    """How many key columns come from timestamps and how many from text."""
    n_time: int
    n_text: int

    @property
    def total(self) -> int:
        return self.n_time + self.n_text


@dataclass
class TraceEntry:
    """Attention weights ``[heads x M x keys]`` for one layer stage, stored float32."""
    layer: int
    stage: str
    weights: np.ndarray
    columns: ContextColumns


def build_context(t: Tensor, d: Tensor, lam: float) -> tuple[Tensor, ContextColumns]:
    """Stack ``lam * t`` over ``d`` as the shared key/value sequence."""
    if t.ndim != 2 or d.ndim != 2 or t.shape[1] != d.shape[1]:
        raise ShapeError(f"context width mismatch: t {t.shape} vs d {d.shape}")
    return concat([t * lam, d], axis=0), ContextColumns(t.shape[0], d.shape[0])


def _split_heads(x: Tensor, heads: int) -> Tensor:
    n, width = x.shape
    return x.reshape(n, heads, width // heads).transpose(1, 0, 2)


def cross_attention(z: Tensor, c: Tensor, params: Mapping[str, Tensor], prefix: str,
                    heads: int, layer: int = 0) -> tuple[Tensor, np.ndarray]:
    """Multi-head scaled dot-product attention of patch rows over context rows.

    Returns:
        (projected output ``[M x d_model]``, weights ``[heads x M x N]``)
    """
    d_model = z.shape[1]
    if c.shape[1] != d_model or d_model % heads:
        raise ShapeError(f"attention widths z {z.shape}, c {c.shape} with {heads} heads")
    d_k = d_model // heads
    q = _split_heads(z.matmul(params[f"{prefix}.wq"]), heads)
    k = _split_heads(c.matmul(params[f"{prefix}.wk"]), heads)
    v = _split_heads(c.matmul(params[f"{prefix}.wv"]), heads)
    try:
        logits = q.matmul(k.transpose()) * (1.0 / math.sqrt(d_k))
    except NonFiniteError as exc:
        raise NonFiniteError(f"non-finite attention logits in fusion layer {layer}") from exc
    weights = softmax(logits, axis=-1)
    attended = weights.matmul(v).transpose(1, 0, 2).reshape(z.shape[0], d_model)
    return attended.matmul(params[f"{prefix}.wo"]), weights.data


def feed_forward(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    hidden = gelu(linear(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"]))
    return linear(hidden, params[f"{prefix}.w2"], params[f"{prefix}.b2"])


def _norm(x: Tensor, params: Mapping[str, Tensor], prefix: str, eps: float) -> Tensor:
    return layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"], eps)


def fuse_layer(z: Tensor, c: Tensor, params: Mapping[str, Tensor], cfg: FusionConfig,
               layer: int = 0) -> tuple[Tensor, np.ndarray]:
    """``z' = LN(z + Attn(z, c))``; ``z_l = LN(z' + FFN(z'))``."""
    p = f"fusion.{layer}"
    attended, weights = cross_attention(z, c, params, f"{p}.attn", cfg.heads, layer)
    z1 = _norm(z + attended, params, f"{p}.ln1", cfg.ln_eps)
    return _norm(z1 + feed_forward(z1, params, f"{p}.ffn"), params, f"{p}.ln2", cfg.ln_eps), weights


def _sequential_layer(z: Tensor, t: Tensor, d: Tensor, params, cfg: FusionConfig, layer: int,
                      trace: Optional[list]) -> Tensor:
    p = f"fusion.{layer}"
    attended, w_time = cross_attention(z, t * cfg.lam, params, f"{p}.attn", cfg.heads, layer)
    z = _norm(z + attended, params, f"{p}.ln1", cfg.ln_eps)
    attended, w_text = cross_attention(z, d, params, f"{p}.attn_text", cfg.heads, layer)
    z = _norm(z + attended, params, f"{p}.ln_text", cfg.ln_eps)
    if trace is not None:
        trace.append(TraceEntry(layer, "time", w_time.astype(np.float32), ContextColumns(t.shape[0], 0)))
        trace.append(TraceEntry(layer, "text", w_text.astype(np.float32), ContextColumns(0, d.shape[0])))
    return _norm(z + feed_forward(z, params, f"{p}.ffn"), params, f"{p}.ln2", cfg.ln_eps)


def _simple_layer(z: Tensor, pooled: Tensor, params, cfg: FusionConfig, layer: int) -> Tensor:
    p = f"fusion.{layer}"
    m = z.shape[0]
    joined = concat([z, pooled.broadcast_to((m, pooled.shape[1]))], axis=1)
    z = _norm(z + joined.matmul(params[f"{p}.simple.w"]), params, f"{p}.ln1", cfg.ln_eps)
    return _norm(z + feed_forward(z, params, f"{p}.ffn"), params, f"{p}.ln2", cfg.ln_eps)


def fuse_stack(z: Tensor, t: Tensor, d: Tensor, cfg: FusionConfig, params: Mapping[str, Tensor],
               trace: Optional[list] = None) -> Tensor:
    """Run ``cfg.layers`` fusion layers; attention weights are appended to ``trace``."""
    if t.shape[1] != z.shape[1] or d.shape[1] != z.shape[1]:
        raise ShapeError(f"fusion widths differ: z {z.shape}, t {t.shape}, d {d.shape}")
    if cfg.mode == "unified":
        c, columns = build_context(t, d, cfg.lam)
        for layer in range(cfg.layers):
            z, weights = fuse_layer(z, c, params, cfg, layer)
            if trace is not None:
                trace.append(TraceEntry(layer, "unified", weights.astype(np.float32), columns))
    elif cfg.mode == "sequential":
        for layer in range(cfg.layers):
            z = _sequential_layer(z, t, d, params, cfg, layer, trace)
    else:
        if cfg.layers:
            pooled = concat([(t * cfg.lam).mean(axis=0, keepdims=True), d.mean(axis=0, keepdims=True)], axis=1)
        for layer in range(cfg.layers):
            z = _simple_layer(z, pooled, params, cfg, layer)
    return z
