"""Fixed classifier heads (random orthonormal and truncated Hadamard) with a learned scale."""

from fixhead._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
