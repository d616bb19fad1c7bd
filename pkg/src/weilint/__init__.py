"""Exact Weil representations of finite quadratic modules."""

__version__ = "0.1.0"
