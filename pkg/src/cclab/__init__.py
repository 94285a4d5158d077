"""Numerical laboratory for Hörmander vector fields: frames, control metrics,
fractional integrals and weighted Sobolev and Poincaré inequalities."""

__version__ = "0.1.0"
