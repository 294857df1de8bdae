"""Discrete and Brownian cactus of random planar maps."""

__version__ = "0.1.0"
