"""Base text encoder interface.

A text encoder turns the reports attached to one window into a sequence of
``d_model``-wide rows the fusion stack can attend to. An empty context maps
to the learned null text row.
"""

from abc import ABC, abstractmethod
from typing import Mapping

from diffcast.data.reports import TextContext
from diffcast.diffusion.guidance import NULL_TEXT
from diffcast.models.params import ParamSpec
from diffcast.numeric.tensor import Tensor


class BaseTextEncoder(ABC):
    """Abstract base class for text encoders."""

    name: str

    @abstractmethod
    def param_specs(self, d_model: int) -> dict[str, ParamSpec]:
        """Learnable arrays this encoder needs, keyed by parameter name."""
        pass

    @abstractmethod
    def embed(self, ctx: TextContext, params: Mapping[str, Tensor]) -> Tensor:
        """Embed a non-empty context.

        Returns:
            Tensor of shape ``[N x d_model]`` with ``N >= 1``
        """
        pass

    def encode(self, ctx: TextContext, params: Mapping[str, Tensor]) -> Tensor:
        if ctx.is_empty:
            return params[NULL_TEXT]
        return self.embed(ctx, params)
