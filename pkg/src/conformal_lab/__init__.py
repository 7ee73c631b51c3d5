"""Numerical laboratory for conformal metrics with negative curvature near
an isolated singularity."""

__version__ = "0.1.0"
