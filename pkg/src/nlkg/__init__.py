"""Numerical laboratory for invariant manifolds of Klein-Gordon solitons."""

__version__ = "0.1.0"
