"""Quasi-static co-simulation of spin-qubit ESR control lines."""

__version__ = "0.1.0"
