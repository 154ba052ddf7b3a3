"""Named learnable arrays for the forecaster.

Names are stable across runs and are what checkpoints store, e.g.
``patch.w1``, ``fusion.0.attn.wq``, ``head.fuse.w2``, ``null.text``.
"""

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from diffcast.core.errors import ShapeError
from diffcast.numeric.tensor import Tensor

Init = Literal["normal", "zeros", "ones"]
CALENDAR_FEATURES = 6


@dataclass(frozen=True)
class ParamSpec:
    shape: tuple[int, ...]
    init: Init = "normal"


def truncated_normal(rng: np.random.Generator, shape: tuple, std: float) -> np.ndarray:
    """Normal(0, std) with draws beyond two standard deviations redrawn."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def _linear(prefix: str, n_in: int, n_out: int, bias: bool = True) -> dict[str, ParamSpec]:
    specs = {f"{prefix}.w": ParamSpec((n_in, n_out))}
    if bias:
        specs[f"{prefix}.b"] = ParamSpec((n_out,), "zeros")
    return specs


def mlp_specs(prefix: str, n_in: int, hidden: int, n_out: int) -> dict[str, ParamSpec]:
    return {
        f"{prefix}.w1": ParamSpec((n_in, hidden)),
        f"{prefix}.b1": ParamSpec((hidden,), "zeros"),
        f"{prefix}.w2": ParamSpec((hidden, n_out)),
        f"{prefix}.b2": ParamSpec((n_out,), "zeros"),
    }


def _layer_norm(prefix: str, width: int) -> dict[str, ParamSpec]:
    return {f"{prefix}.gain": ParamSpec((width,), "ones"), f"{prefix}.bias": ParamSpec((width,), "zeros")}


def _attention(prefix: str, d: int) -> dict[str, ParamSpec]:
    return {f"{prefix}.{w}": ParamSpec((d, d)) for w in ("wq", "wk", "wv", "wo")}


def fusion_layer_specs(layer: int, d: int, mode: str) -> dict[str, ParamSpec]:
    p = f"fusion.{layer}"
    specs: dict[str, ParamSpec] = {}
    if mode == "simple":
        specs.update(_linear(f"{p}.simple", 3 * d, d, bias=False))
    else:
        specs.update(_attention(f"{p}.attn", d))
    specs.update(_layer_norm(f"{p}.ln1", d))
    if mode == "sequential":
        specs.update(_attention(f"{p}.attn_text", d))
        specs.update(_layer_norm(f"{p}.ln_text", d))
    specs.update(mlp_specs(f"{p}.ffn", d, 4 * d, d))
    specs.update(_layer_norm(f"{p}.ln2", d))
    return specs


def head_specs(d: int, out_width: int, hidden: int) -> dict[str, ParamSpec]:
    specs: dict[str, ParamSpec] = {}
    for source in ("z", "t", "d"):
        specs.update(_linear(f"head.{source}", d, out_width))
    specs.update(mlp_specs("head.fuse", 3 * out_width, hidden, 3))
    return specs


class ModelParams(Mapping):
    """Ordered ``name -> Tensor`` mapping; every entry tracks gradients."""

    def __init__(self, tensors: Mapping[str, Tensor]):
        self._tensors = dict(tensors)

    @classmethod
    def initialize(cls, specs: Mapping[str, ParamSpec], rng: np.random.Generator,
                   std: float = 0.02) -> "ModelParams":
        tensors = {}
        for name, spec in specs.items():
            if spec.init == "zeros":
                data = np.zeros(spec.shape)
            elif spec.init == "ones":
                data = np.ones(spec.shape)
            else:
                data = truncated_normal(rng, spec.shape, std)
            tensors[name] = Tensor(data, requires_grad=True)
        return cls(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def shapes(self) -> dict[str, tuple]:
        return {name: t.shape for name, t in self._tensors.items()}

    def count(self) -> int:
        return int(sum(t.data.size for t in self._tensors.values()))

    def to_arrays(self, dtype=np.float64) -> dict[str, np.ndarray]:
        return {name: t.data.astype(dtype) for name, t in self._tensors.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Overwrite every parameter; names and shapes must match exactly."""
        missing = sorted(set(self._tensors) - set(arrays))
        extra = sorted(set(arrays) - set(self._tensors))
        mismatched = [
            f"{name}: expected {self._tensors[name].shape}, got {tuple(arrays[name].shape)}"
            for name in self._tensors
            if name in arrays and tuple(arrays[name].shape) != self._tensors[name].shape
        ]
        if missing or extra or mismatched:
            parts = []
            if missing:
                parts.append(f"missing {missing}")
            if extra:
                parts.append(f"unexpected {extra}")
            parts.extend(mismatched)
            raise ShapeError("parameter mismatch: " + "; ".join(parts))
        for name, tensor in self._tensors.items():
            tensor.data = np.asarray(arrays[name], dtype=np.float64).copy()

    def quantize_float32(self) -> None:
        """Round every parameter through float32, the checkpoint precision."""
        for tensor in self._tensors.values():
            tensor.data = tensor.data.astype(np.float32).astype(np.float64)

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()
