"""Optimized layerwise approximation of activation functions."""

from .version import version_string as __version__
