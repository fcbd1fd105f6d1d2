"""Simulation of non-local polarization alignment with entangled photon pairs."""

__version__ = "0.1.0"
