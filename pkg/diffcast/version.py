"""Single source of truth for package version + checkpoint format compatibility.

`__version__` is the human-readable release version (semver).

`CHECKPOINT_FORMAT` is a monotonically increasing integer bumped on **any
breaking change** to the named-array container that checkpoints, attention
traces and precomputed text embeddings are stored in (header layout, record
layout, metadata keys the loader depends on). Readers reject files whose
format integer differs from their own.

Bumping rules:
- Add an optional metadata key the loader ignores when absent → DO NOT bump.
- Rename / remove a metadata key, change record layout, change payload dtype,
  rename parameters in a way old files can't be mapped → BUMP.

Update log (most recent first):
- 1: Initial container layout.
"""

__version__ = "0.1.0"
CHECKPOINT_FORMAT = 1
