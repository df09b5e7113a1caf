"""Numerical checks of Lipschitz normal embedding for subsets of R^q."""

__version__ = "0.1.0"
