"""Text encoder abstractions and factory."""

from diffcast.core.errors import ConfigError

from .base import BaseTextEncoder
from .hashed_bow import HashedBagOfWords, fnv1a_64, tokenize
from .precomputed import PrecomputedTextEncoder, write_text_embeddings


def create_text_encoder(model_cfg) -> BaseTextEncoder:
    """Factory function to create the configured text encoder.

    Args:
        model_cfg: ``ModelConfig`` section ("hashed" or "precomputed" encoder)

    Returns:
        BaseTextEncoder instance
    """
    if model_cfg.text_encoder == "hashed":
        return HashedBagOfWords(vocab=model_cfg.text_vocab, max_tokens=model_cfg.max_text_tokens)
    elif model_cfg.text_encoder == "precomputed":
        return PrecomputedTextEncoder(model_cfg.text_embeddings_path)
    else:
        raise ConfigError(f"Unsupported text encoder: {model_cfg.text_encoder}")


__all__ = [
    "BaseTextEncoder",
    "HashedBagOfWords",
    "PrecomputedTextEncoder",
    "create_text_encoder",
    "fnv1a_64",
    "tokenize",
    "write_text_embeddings",
]
