"""Certified finite-scale covering numbers and conditional metric mean dimension."""

__version__ = "0.1.0"
