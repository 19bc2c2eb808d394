"""Streaming spectral sparsification by repeated coin-flip resampling."""

__version__ = "0.1.0"
