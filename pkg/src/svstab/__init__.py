"""Stability certificates and IMEX simulation for the linearized viscous Saint-Venant equations."""

__version__ = "0.1.0"
