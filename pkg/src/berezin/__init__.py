"""Exact Berezin-Toeplitz calculus on model Kahler geometries.

Submodules
----------
jets
    Truncated multivariate power series in the groups x, y_c, u, v.
geometry
    Built-in models and their phase data at a base point.
starproduct
    The operators P_l and A_l, coefficient tables and the star product.
bergman
    Bergman-symbol coefficients rho_l.
contravariant
    The contravariant to covariant map B and its inverse.
symbols
    Partial sums, growth fits, remainder bounds and seminorms.
oracle
    Exact Toeplitz quantization on CP^1.
cli
    Command line front end.
"""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
