"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time from the ``FACEGEOM_BACKEND``
environment variable:

* ``auto`` (default) — numba when importable, numpy otherwise;
* ``numba`` — require numba, raise if it cannot be imported;
* ``numpy`` — force the pure-numpy fallback.

``benchmarks/bench_kernels.py`` compares the two implementations.
"""
from __future__ import annotations

import os

_choice = os.environ.get("FACEGEOM_BACKEND", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"FACEGEOM_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _numpy as _impl

    _backend_name = "numpy"
elif _choice == "numba":
    from . import _numba as _impl

    _backend_name = "numba"
else:
    try:
        from . import _numba as _impl

        _backend_name = "numba"
    except ImportError:
        from . import _numpy as _impl

        _backend_name = "numpy"

closest_points = _impl.closest_points
rasterize = _impl.rasterize


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return _backend_name
