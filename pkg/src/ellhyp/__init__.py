"""Numerical verification of elliptic hypergeometric integral identities."""

__version__ = "0.1.0"
