"""Numerical laboratory for max-norm central limit bounds in high dimension."""
from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
