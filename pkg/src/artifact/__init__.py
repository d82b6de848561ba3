"""Numerical toolkit for reflection metrics near Lagrangians and thick-thin energy estimates."""

__version__ = "0.1.0"
