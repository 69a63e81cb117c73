"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``GPHIER_PURE_PYTHON=1``
to force the NumPy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("GPHIER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

duhamel_accumulate = _impl.duhamel_accumulate
weighted_sqnorm = _impl.weighted_sqnorm

__all__ = ["BACKEND", "duhamel_accumulate", "weighted_sqnorm"]
