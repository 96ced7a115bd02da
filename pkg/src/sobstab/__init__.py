"""Numerical laboratory for quantitative stability of the sharp Sobolev inequality."""
__version__ = "0.1.0"
