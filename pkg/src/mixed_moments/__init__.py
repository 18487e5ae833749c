"""Numerics for smoothed mixed moments of L(1/2+it, f)|zeta(1/2+it)|^2."""

__version__ = "0.1.0"
