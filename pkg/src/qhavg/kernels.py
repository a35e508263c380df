"""Kernel selection: compiled extension when importable, else pure Python.

Set ``QHAVG_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
grid_dijkstra = _kernels_py.grid_dijkstra

if os.environ.get("QHAVG_PURE") != "1":
    try:
        from . import _kernels_c
    except ImportError:  # extension not built
        _kernels_c = None
    else:
        grid_dijkstra = _kernels_c.grid_dijkstra
        BACKEND = "cython"


def available_backends() -> dict:
    backends = {"python": _kernels_py.grid_dijkstra}
    try:
        from . import _kernels_c as compiled
    except ImportError:
        return backends
    backends["cython"] = compiled.grid_dijkstra
    return backends
