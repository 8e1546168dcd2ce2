"""Driven dimer growth on Z^2 and the honeycomb lattice."""

__version__ = "0.1.0"
