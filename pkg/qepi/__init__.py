"""Numerical toolkit for quantum entropy power inequalities."""

__version__ = "0.1.0"
