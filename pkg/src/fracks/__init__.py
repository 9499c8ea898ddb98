"""Pseudo-spectral fractional Keller-Segel solver with a verification harness."""

__version__ = "0.1.0"
