"""Centralized path constants for the project."""

import os
from pathlib import Path

# Project root: paths.py -> core/ -> diffcast/ -> repo root
PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent

DATA_DIR = PROJECT_ROOT / "data"
CONFIGS_DIR = PROJECT_ROOT / "configs"


def runs_dir() -> Path:
    """Default output root; ``DIFFCAST_RUNS_DIR`` overrides it."""
    return Path(os.getenv("DIFFCAST_RUNS_DIR", str(PROJECT_ROOT / "runs")))
