"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython extension is used when it was built; set ``LIPLIVE_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("LIPLIVE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

local_linear_fit = _impl.local_linear_fit
smo_solve = _impl.smo_solve

__all__ = ["BACKEND", "local_linear_fit", "smo_solve"]
