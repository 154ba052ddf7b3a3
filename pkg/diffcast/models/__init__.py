"""Encoders, fusion stack, prediction head and the assembled forecaster."""

from .forecaster import Conditions, DiffusionForecaster, Example, examples_from_windows
from .params import ModelParams, ParamSpec

__all__ = [
    "Conditions",
    "DiffusionForecaster",
    "Example",
    "ModelParams",
    "ParamSpec",
    "examples_from_windows",
]
