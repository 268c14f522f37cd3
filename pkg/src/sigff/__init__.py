"""Simulation laboratory for the scale-inhomogeneous discrete Gaussian free field."""

__version__ = "0.1.0"
