"""Text encoder backed by externally computed report embeddings.

The embeddings file is a named-array container with one record per report,
named ``report/<index>`` (index into the sorted report list), each a vector
of the same width. A learned projection maps them to ``d_model``.
"""

import logging
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from diffcast.core.errors import CheckpointError, InputError
from diffcast.data.reports import TextContext
from diffcast.models.params import ParamSpec
from diffcast.models.text.base import BaseTextEncoder
from diffcast.numeric.functional import linear
from diffcast.numeric.tensor import Tensor
from diffcast.utils.container import read_container, write_container

logger = logging.getLogger(__name__)

RECORD_PREFIX = "report/"


def write_text_embeddings(path: Union[str, Path], vectors: Mapping[int, np.ndarray]) -> Path:
    widths = {np.asarray(v).shape for v in vectors.values()}
    if len(widths) > 1:
        raise InputError(f"text embeddings must share one width, got {sorted(widths)}")
    dim = next(iter(widths))[0] if widths else 0
    arrays = {f"{RECORD_PREFIX}{i}": np.asarray(v) for i, v in sorted(vectors.items())}
    return write_container(path, arrays, {"kind": "text-embeddings", "dim": int(dim)})


class PrecomputedTextEncoder(BaseTextEncoder):
    name = "precomputed"

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        container = read_container(self.path)
        if container.metadata.get("kind") != "text-embeddings":
            raise CheckpointError(f"{self.path} is not a text-embeddings file")
        self.dim = int(container.metadata["dim"])
        self.vectors: dict[int, np.ndarray] = {}
        for name, array in container.arrays.items():
            if not name.startswith(RECORD_PREFIX):
                continue
            if array.shape != (self.dim,):
                raise CheckpointError(f"{self.path}: record {name!r} has shape {array.shape}, expected ({self.dim},)")
            self.vectors[int(name[len(RECORD_PREFIX):])] = array.astype(np.float64)
        logger.info("Loaded %d text embeddings (dim=%d) from %s", len(self.vectors), self.dim, self.path)

    def param_specs(self, d_model: int) -> dict[str, ParamSpec]:
        return {"text.proj.w": ParamSpec((self.dim, d_model)), "text.proj.b": ParamSpec((d_model,), "zeros")}

    def embed(self, ctx: TextContext, params: Mapping[str, Tensor]) -> Tensor:
        rows = []
        for report in ctx.reports:
            if report.index not in self.vectors:
                raise InputError(f"no precomputed embedding for report {report.index}")
            rows.append(self.vectors[report.index])
        return linear(Tensor(np.stack(rows)), params["text.proj.w"], params["text.proj.b"])
