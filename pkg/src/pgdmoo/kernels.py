"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``PGDMOO_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("PGDMOO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

front_ranks = backend.front_ranks
hv2d = backend.hv2d
hv3d = backend.hv3d
count_dominated = backend.count_dominated

__all__ = [
    "BACKEND_NAME",
    "compiled_backend",
    "python_backend",
    "front_ranks",
    "hv2d",
    "hv3d",
    "count_dominated",
]
