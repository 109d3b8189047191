"""Gaussian analytic functions on the polydisk with hyperbolic symmetry: sampling, zeros, statistics."""

__version__ = "0.1.0"
