"""Select the compiled kernels when available, else the numpy fallback."""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("RSCNET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

jacobi_eigh = _impl.jacobi_eigh
ascent_221 = _impl.ascent_221

__all__ = ["BACKEND", "jacobi_eigh", "ascent_221"]
