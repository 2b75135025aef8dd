"""Monotonicity-based shape reconstruction for Helmholtz scatterers in the unit disk."""

__version__ = "0.1.0"
