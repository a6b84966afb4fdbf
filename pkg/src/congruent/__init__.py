"""Congruent numbers, 2-Selmer ranks and rank statistics for the twists y^2 = x^3 - D^2 x."""

from .errors import CongruentError

__version__ = "0.1.0"

__all__ = ["CongruentError", "__version__"]
