"""Hot-loop backend selection.

The compiled extension is used when it imports; set ``BEVBOOST_PURE_PYTHON=1``
to force the numpy fallback.  ``BACKEND`` names the active one.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("BEVBOOST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"


def _prep(*arrays):
    dtype = np.result_type(*arrays)
    if dtype not in (np.float32, np.float64):
        dtype = np.float64
    return [np.ascontiguousarray(a, dtype=dtype) for a in arrays]


def grid_sample_chw(inp, grid, impl=None):
    inp, grid = _prep(inp, grid)
    return (impl or _impl).grid_sample_forward(inp, grid)


def grid_sample_chw_backward(inp, grid, gout, impl=None):
    inp, grid, gout = _prep(inp, grid, gout)
    return (impl or _impl).grid_sample_backward(inp, grid, gout)
