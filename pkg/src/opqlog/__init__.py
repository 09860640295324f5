"""High-precision orthogonal-polynomial toolkit for logarithmic weights on [-1, 1]."""

__version__ = "0.1.0"
