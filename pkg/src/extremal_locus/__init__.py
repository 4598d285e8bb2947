"""Numerical toolkit for small extremal domains of the first Dirichlet eigenvalue."""

__version__ = "0.1.0"
