"""Hot inner loops, compiled when the extension is built.

Set ``ALPHAX_PURE_PYTHON=1`` to force the pure-Python implementations.
"""
import os

from . import _fallback

fallback = _fallback
compiled = None
if os.environ.get("ALPHAX_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as compiled
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else _fallback
BACKEND_NAME = "cython" if compiled is not None else "python"

ucb_select = backend.ucb_select
dag_walk = backend.dag_walk
dag_structure = backend.dag_structure
hamming_many = backend.hamming_many

__all__ = [
    "BACKEND_NAME",
    "compiled",
    "dag_structure",
    "dag_walk",
    "fallback",
    "hamming_many",
    "ucb_select",
]
