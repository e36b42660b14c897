"""Helmholtz-condition checks and multiplier search for second-order ODE systems."""

__version__ = "0.1.0"
