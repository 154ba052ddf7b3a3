"""Tests for the hashed bag-of-words and precomputed text encoders."""

import numpy as np
import pytest

from diffcast.core.config import ModelConfig
from diffcast.core.errors import InputError
from diffcast.data.reports import Report, TextContext, sort_reports
from diffcast.diffusion.guidance import NULL_TEXT
from diffcast.models.params import ModelParams, ParamSpec
from diffcast.models.text import (
    HashedBagOfWords,
    PrecomputedTextEncoder,
    create_text_encoder,
    fnv1a_64,
    tokenize,
    write_text_embeddings,
)


def context(*texts):
    reports = [Report(start="2024-01-01", end="2024-01-02", text=t) for t in texts]
    return TextContext(tuple(sort_reports(reports)))


def hashed_params(encoder, rng, d_model=4):
    specs = dict(encoder.param_specs(d_model))
    specs[NULL_TEXT] = ParamSpec((1, d_model))
    return ModelParams.initialize(specs, rng, std=1.0)


class TestTokenize:
    def test_lowercases_and_splits(self):
        assert tokenize("Flu cases ROSE, sharply_today!") == ["flu", "cases", "rose", "sharply", "today"]

    def test_empty(self):
        assert tokenize("  ...  ") == []

    def test_fnv_offset_for_empty_string(self):
        assert fnv1a_64("") == 0xCBF29CE484222325

    def test_fnv_known_value(self):
        assert fnv1a_64("a") == 0xAF63DC4C8601EC8C


class TestHashedBagOfWords:
    def test_repeated_token_identical_rows(self, rng):
        encoder = HashedBagOfWords(vocab=64)
        params = hashed_params(encoder, rng)
        out = encoder.encode(context("flu flu"), params).data
        assert out.shape == (2, 4)
        assert np.array_equal(out[0], out[1])

    def test_empty_context_uses_null_row(self, rng):
        encoder = HashedBagOfWords(vocab=64)
        params = hashed_params(encoder, rng)
        out = encoder.encode(TextContext(), params)
        assert out is params[NULL_TEXT]
        assert encoder.encode(context("   "), params) is params[NULL_TEXT]

    def test_punctuation_only_uses_null_row(self, rng):
        encoder = HashedBagOfWords(vocab=64)
        params = hashed_params(encoder, rng)
        assert encoder.encode(context("?!"), params) is params[NULL_TEXT]

    def test_keeps_most_recent_tokens(self):
        encoder = HashedBagOfWords(vocab=1000, max_tokens=2)
        ids = encoder.token_ids(context("alpha beta gamma"))
        assert ids.tolist() == [fnv1a_64("beta") % 1000, fnv1a_64("gamma") % 1000]

    def test_deterministic_ids(self):
        encoder = HashedBagOfWords(vocab=97)
        ctx = context("cold snap", "holiday weekend")
        assert np.array_equal(encoder.token_ids(ctx), encoder.token_ids(ctx))
        assert np.all(encoder.token_ids(ctx) < 97)


class TestPrecomputed:
    def test_projects_report_vectors(self, tmp_path, rng):
        path = write_text_embeddings(tmp_path / "emb.undf", {0: np.ones(3), 1: np.arange(3.0)})
        encoder = PrecomputedTextEncoder(path)
        assert encoder.dim == 3
        params = ModelParams.initialize(encoder.param_specs(5), rng, std=1.0)
        out = encoder.encode(context("first", "second"), params).data
        assert out.shape == (2, 5)
        assert np.allclose(out[0], np.ones(3) @ params["text.proj.w"].data)

    def test_missing_report(self, tmp_path, rng):
        encoder = PrecomputedTextEncoder(write_text_embeddings(tmp_path / "emb.undf", {0: np.ones(2)}))
        params = ModelParams.initialize(encoder.param_specs(4), rng)
        with pytest.raises(InputError, match="report 1"):
            encoder.encode(context("a", "b"), params)

    def test_mixed_widths_rejected(self, tmp_path):
        with pytest.raises(InputError):
            write_text_embeddings(tmp_path / "emb.undf", {0: np.ones(2), 1: np.ones(3)})


class TestFactory:
    def test_hashed_default(self):
        encoder = create_text_encoder(ModelConfig(text_vocab=128, max_text_tokens=10))
        assert isinstance(encoder, HashedBagOfWords)
        assert (encoder.vocab, encoder.max_tokens) == (128, 10)

    def test_precomputed(self, tmp_path):
        path = write_text_embeddings(tmp_path / "emb.undf", {0: np.ones(2)})
        cfg = ModelConfig(text_encoder="precomputed", text_embeddings_path=str(path))
        assert isinstance(create_text_encoder(cfg), PrecomputedTextEncoder)
