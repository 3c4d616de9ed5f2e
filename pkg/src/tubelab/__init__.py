"""Smooth isomorphism paths, twisted tubes and bump functions in l2."""

__version__ = "0.1.0"
