"""Stacked intelligent metasurface simulation and phase optimization."""

__version__ = "0.1.0"
