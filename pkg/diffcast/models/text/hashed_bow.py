"""Deterministic hashed bag-of-words text encoder."""

import re
from typing import Mapping

import numpy as np

from diffcast.data.reports import TextContext
from diffcast.diffusion.guidance import NULL_TEXT
from diffcast.models.params import ParamSpec
from diffcast.models.text.base import BaseTextEncoder
from diffcast.numeric.tensor import Tensor

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_TOKEN = re.compile(r"[^\W_]+")


def fnv1a_64(token: str) -> int:
    h = FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase, then split on whitespace, punctuation and underscores."""
    return _TOKEN.findall(text.lower())


class HashedBagOfWords(BaseTextEncoder):
    """One learned table row per hash bucket; one output row per token."""

    name = "hashed"

    def __init__(self, vocab: int = 4096, max_tokens: int = 256):
        self.vocab = vocab
        self.max_tokens = max_tokens

    def param_specs(self, d_model: int) -> dict[str, ParamSpec]:
        return {"text.table": ParamSpec((self.vocab, d_model))}

    def token_ids(self, ctx: TextContext) -> np.ndarray:
        """Bucket ids of the most recent ``max_tokens`` tokens, oldest first."""
        tokens = [tok for text in ctx.texts for tok in tokenize(text)]
        tokens = tokens[-self.max_tokens:]
        return np.asarray([fnv1a_64(tok) % self.vocab for tok in tokens], dtype=np.int64)

    def embed(self, ctx: TextContext, params: Mapping[str, Tensor]) -> Tensor:
        ids = self.token_ids(ctx)
        if len(ids) == 0:
            return params[NULL_TEXT]
        return params["text.table"][ids]
