"""Solvers for 1-D non-linear hyperbolic balance laws on moving domains
with characteristic-based boundary treatment."""

__version__ = "0.1.0"
