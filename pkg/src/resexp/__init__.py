"""Residual expansion optimization for nonconvex least squares."""

__version__ = "0.1.0"
