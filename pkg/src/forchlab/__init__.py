"""Rotating generalized Forchheimer flows: constitutive inversion, solver and estimate checks."""

__version__ = "0.1.0"
