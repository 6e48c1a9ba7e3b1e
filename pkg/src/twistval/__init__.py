"""Exact 2-adic valuations of quadratic-twist L-values via modular symbols."""

__version__ = "0.1.0"
