"""Numerical laboratory for Lieb-Thirring bounds with nearest-neighbor repulsion."""

__version__ = "0.1.0"
