"""Select the tube-flux kernel at import time.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``RRLAB_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy implementation is used.
"""
import os

from . import _tube_py

_forced = os.environ.get("RRLAB_PURE_PYTHON", "") not in ("", "0")

try:
    if _forced:
        raise ImportError("pure-Python backend requested")
    from . import _tube_kernel as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _tube_py.tube_node_terms}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.tube_node_terms

NAME = "compiled" if _compiled is not None else "python"
tube_node_terms = BACKENDS[NAME]


def get(name=None):
    """Return the kernel function for ``name`` (default: the active backend)."""
    if name is None:
        return tube_node_terms
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
