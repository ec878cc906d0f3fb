"""Kernel dispatch: the compiled core when built, the pure-Python reference
otherwise.  ``BACKEND`` names the one in use."""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("CTLAB_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

trace_integer_line = _impl.trace_integer_line
trace_corner_line = _impl.trace_corner_line
dijkstra_layered = _impl.dijkstra_layered
leaf_distances = _impl.leaf_distances
