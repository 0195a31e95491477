"""Backend selection for the ray casting kernels.

The compiled extension is preferred; the pure-Python kernels are used when
the extension is missing or when GRIDBEV_PURE_PYTHON is set. Both backends
implement the same arithmetic and produce bit-identical accumulators.
"""

from __future__ import annotations

import os

from . import _raycast_py

if os.environ.get("GRIDBEV_PURE_PYTHON"):
    kernel = _raycast_py
else:
    try:
        from . import _raycast_c as kernel
    except ImportError:
        kernel = _raycast_py

pure_python = _raycast_py


def backend_name() -> str:
    return "compiled" if kernel.IS_COMPILED else "python"
