"""Tri-zone mask priors and iterative quadruplet construction for cross-category try-on."""

__version__ = "0.1.0"
