"""Kernel backend selection.

The compiled extension ``netel._kernels`` is used when it imports; otherwise the
numpy implementation in ``netel._kernels_py`` is used. Setting the environment
variable ``NETEL_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("NETEL_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

log_star_terms = _impl.log_star_terms
local_terms = _impl.local_terms
local_value = _impl.local_value
pcm_node_solve = _impl.pcm_node_solve
maom_node_solve = _impl.maom_node_solve
pcm_edges = _impl.pcm_edges
maom_edges = _impl.maom_edges
soft_threshold_rows = _impl.soft_threshold_rows


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
