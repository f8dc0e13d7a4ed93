"""Likelihood-POVM measurement compression and quantum covering experiments."""

__version__ = "0.1.0"
