"""Finite-scale experiments with warped cones over isometric group actions."""

__version__ = "0.1.0"
