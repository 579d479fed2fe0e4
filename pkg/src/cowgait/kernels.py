"""Backend selection for the numeric inner loops.

The compiled extension ``cowgait._kernels`` is used when it imports; the
pure-Python versions in ``cowgait._pykernels`` are the fallback. Setting
``COWGAIT_PURE_PYTHON=1`` forces the fallback.

``BACKEND`` names the active implementation ("cython" or "python").
"""
import os

from . import _pykernels

python = _pykernels

if os.environ.get("COWGAIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

compiled = _impl if BACKEND == "cython" else None

mad_filter = _impl.mad_filter
best_split = _impl.best_split
smo_solve = _impl.smo_solve

__all__ = ["BACKEND", "mad_filter", "best_split", "smo_solve", "python", "compiled"]
