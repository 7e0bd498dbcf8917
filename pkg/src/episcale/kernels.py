"""Kernel backend selection.

The compiled extension is preferred; the pure-Python module is the fallback
when it is not built.  Set ``EPISCALE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("EPISCALE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

bfs_all = _impl.bfs_all
Gf2Eliminator = _impl.Gf2Eliminator

__all__ = ["BACKEND", "bfs_all", "Gf2Eliminator"]
