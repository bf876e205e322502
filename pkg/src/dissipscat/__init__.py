"""Dissipative boundary problems for the Maxwell system outside the unit sphere."""

__version__ = "0.1.0"
