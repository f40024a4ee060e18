"""Simulation and analysis of a phase-preserving partial wavelength converter."""

__version__ = "0.1.0"
