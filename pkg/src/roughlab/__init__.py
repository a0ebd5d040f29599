"""Numerical laboratory for fractional Brownian motion, Lévy areas and rough paths."""

__version__ = "0.1.0"
