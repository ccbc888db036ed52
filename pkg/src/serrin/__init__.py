"""Singular solutions of the fractional Lane-Emden equation at the Serrin exponent."""

__version__ = "0.1.0"
