"""Thin Dirichlet tubes around closed curves and their effective 1D operators."""

__version__ = "0.1.0"
