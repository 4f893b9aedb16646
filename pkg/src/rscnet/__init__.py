"""Restricted strong convexity and smoothness certificates for deep feedforward networks."""
__version__ = "0.1.0"

from . import activation, bounds, data, hermite, linalg, network, ntk, trainer, verify  # noqa: E402
from ._kernels import BACKEND  # noqa: E402

__all__ = ["activation", "bounds", "data", "hermite", "linalg", "network", "ntk", "trainer", "verify", "BACKEND",
           "__version__"]
