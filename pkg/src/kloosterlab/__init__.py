"""Numerical laboratory for Kloosterman-type sums, p-adic stationary phase and
the second moment of twisted modular L-functions at desk scale."""

__version__ = "0.1.0"
