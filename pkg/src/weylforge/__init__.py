"""Numerical verification engine for Einstein-Weyl spaces, monopoles and selfdual 4-manifolds."""

__version__ = "0.1.0"
