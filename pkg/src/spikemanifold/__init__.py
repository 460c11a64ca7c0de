"""Spiking graph networks on constant-curvature product manifolds."""

from ._kernels import BACKEND_NAME as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
