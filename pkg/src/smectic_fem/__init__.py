"""Finite elements for the fourth-order smectic density equation in 2D."""

__version__ = "0.1.0"
