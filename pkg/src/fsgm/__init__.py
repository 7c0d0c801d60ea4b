"""Functional graphical models via nonlinear sufficient dimension reduction."""

__version__ = "0.1.0"
