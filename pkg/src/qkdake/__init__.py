"""Simulation of authenticated key exchange with BB84 quantum key distribution."""

__version__ = "0.1.0"
