"""Numerical laboratory for homogeneous order-one solutions of elliptic equations."""

__version__ = "0.1.0"
