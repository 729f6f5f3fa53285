"""Capacity mechanisms and demand-side flexibility in a single-zone power system model."""

__version__ = "0.1.0"
