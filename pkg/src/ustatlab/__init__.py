"""Simulation and verification laboratory for mean-field systems with k-body interactions."""

__version__ = "0.1.0"
