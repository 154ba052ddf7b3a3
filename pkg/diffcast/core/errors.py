"""Exception hierarchy shared by every diffcast module.

The CLI maps ``ConfigError`` to exit code 2 and every other
``DiffcastError`` to exit code 1.
"""


class DiffcastError(Exception):
    """Root of all diffcast errors."""


class ConfigError(DiffcastError, ValueError):
    """Invalid or missing configuration value."""


class InputError(DiffcastError, ValueError):
    """Malformed input data (CSV rows, report lines, timestamps)."""


class ShapeError(DiffcastError, ValueError):
    """Dimension mismatch between operands."""


class NonFiniteError(DiffcastError, FloatingPointError):
    """NaN or Inf produced by an op, gradient, loss or sampler step."""


class ContractError(DiffcastError, RuntimeError):
    """API called outside its contract."""


class CheckpointError(DiffcastError):
    """Unreadable, truncated or incompatible checkpoint/container file."""
