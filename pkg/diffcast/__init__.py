"""Multimodal conditional diffusion forecaster."""

from diffcast.version import __version__

__all__ = ["__version__"]
