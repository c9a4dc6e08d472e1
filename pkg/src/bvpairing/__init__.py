"""Nonlinear pairings between one-dimensional BV functions and divergence-measure fields."""

__version__ = "0.1.0"
