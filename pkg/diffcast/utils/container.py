"""Named-array container shared by checkpoints, attention traces and text embeddings.

Layout (all integers little-endian u32)::

    b"UNDF" | version | meta_len | meta (canonical YAML, utf-8)
    then until EOF: name_len | name | rank | dims[rank] | float32 payload

Files are written to a temporary sibling and moved into place. Reads parse
the whole buffer before returning, so a damaged file yields an error and
nothing else.
"""

import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
import yaml

from diffcast.core.errors import CheckpointError
from diffcast.version import CHECKPOINT_FORMAT

logger = logging.getLogger(__name__)

MAGIC = b"UNDF"
_U32 = struct.Struct("<I")

PathLike = Union[str, os.PathLike]


@dataclass
class NamedArrays:
    metadata: dict = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def encode_container(arrays: Mapping[str, np.ndarray], metadata: Optional[dict] = None,
                     version: int = CHECKPOINT_FORMAT) -> bytes:
    meta = yaml.safe_dump(metadata or {}, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, _U32.pack(version), _U32.pack(len(meta)), meta]
    for name, array in arrays.items():
        encoded = name.encode("utf-8")
        # ascontiguousarray promotes rank 0 to rank 1
        payload = np.ascontiguousarray(array, dtype="<f4").reshape(np.shape(array))
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(payload.ndim))
        chunks.extend(_U32.pack(dim) for dim in payload.shape)
        chunks.append(payload.tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, buf: bytes, source: str):
        self.buf = buf
        self.pos = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(
                f"{self.source}: truncated while reading {what} at byte {self.pos}"
            )
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.pos >= len(self.buf)


def decode_container(buf: bytes, source: str = "<bytes>",
                     expected_version: Optional[int] = CHECKPOINT_FORMAT) -> NamedArrays:
    reader = _Reader(buf, source)
    if reader.take(4, "magic") != MAGIC:
        raise CheckpointError(f"{source}: bad magic, not a diffcast container")
    version = reader.u32("version")
    if expected_version is not None and version != expected_version:
        raise CheckpointError(
            f"{source}: container format {version} is not supported (expected {expected_version})"
        )
    meta_text = reader.take(reader.u32("metadata length"), "metadata").decode("utf-8")
    try:
        metadata = yaml.safe_load(meta_text) or {}
    except yaml.YAMLError as exc:
        raise CheckpointError(f"{source}: corrupt metadata block: {exc}") from exc
    if not isinstance(metadata, dict):
        raise CheckpointError(f"{source}: metadata block is not a mapping")

    arrays: dict[str, np.ndarray] = {}
    while not reader.done:
        name = reader.take(reader.u32("record name length"), "record name").decode("utf-8")
        rank = reader.u32(f"rank of {name!r}")
        dims = tuple(reader.u32(f"dims of {name!r}") for _ in range(rank))
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        payload = reader.take(4 * count, f"payload of {name!r}")
        if name in arrays:
            raise CheckpointError(f"{source}: duplicate record {name!r}")
        arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return NamedArrays(metadata=metadata, arrays=arrays)


def write_container(path: PathLike, arrays: Mapping[str, np.ndarray],
                    metadata: Optional[dict] = None, version: int = CHECKPOINT_FORMAT) -> Path:
    """Atomically write ``arrays`` (stored as float32) plus ``metadata`` to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_container(arrays, metadata, version)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("Wrote %d arrays to %s (%d bytes)", len(arrays), path, len(data))
    return path


def read_container(path: PathLike, expected_version: Optional[int] = CHECKPOINT_FORMAT) -> NamedArrays:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    return decode_container(buf, str(path), expected_version)
