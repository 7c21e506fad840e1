"""Sparse fluid-antenna array designs and co-array DOA estimation."""

__version__ = "0.1.0"
