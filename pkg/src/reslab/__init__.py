"""Numerical laboratory for resonant energy transfer in cubic Hamiltonian PDEs on the 2-torus."""

__version__ = "0.1.0"
