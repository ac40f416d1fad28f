"""Hot numeric kernels.

Two interchangeable implementations live side by side: ``numba_impl``
(``@njit`` loops) and ``numpy_impl`` (vectorized numpy). The active one is
picked once at import: numba when it is importable, unless the environment
variable ``URK_DISABLE_NUMBA`` is set to a truthy value.
"""

import importlib
import os

from . import numpy_impl

_disabled = os.environ.get("URK_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

numba_impl = None
if not _disabled:
    try:
        numba_impl = importlib.import_module(".numba_impl", __name__)
    except ImportError:  # pragma: no cover - numba is optional
        numba_impl = None

active = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if active is not numpy_impl else "numpy"

fill_matrix = active.fill_matrix
mat_apply = active.mat_apply
sparse_search = active.sparse_search
rref = active.rref

# shared helpers, identical across backends
inverse_table = numpy_impl.inverse_table
key_rows = numpy_impl.key_rows
multiples_table = numpy_impl.multiples_table

__all__ = [
    "BACKEND",
    "active",
    "numba_impl",
    "numpy_impl",
    "fill_matrix",
    "mat_apply",
    "sparse_search",
    "rref",
    "inverse_table",
    "key_rows",
    "multiples_table",
]
