"""Fractional p-Laplacian problems on intervals and on long cylinders."""

__version__ = "0.1.0"
