"""Kernel backend selection.

The hot numeric kernels (batched forward kinematics and its gradient, the
kernel-density query) exist in two variants: a numba ``@njit`` build and a
pure-numpy build. The active variant is chosen once at import time:

* ``SHAPEIK_BACKEND=numpy`` forces the pure-numpy path.
* ``SHAPEIK_BACKEND=numba`` forces numba (ImportError if unavailable).
* unset: numba when importable, numpy otherwise.

``benchmarks/bench_kernels.py`` compares both variants side by side.
"""

from __future__ import annotations

import os

ENV_VAR = "SHAPEIK_BACKEND"
_VALID = ("numba", "numpy")


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def select_backend() -> str:
    """Resolve the backend name from the environment, validating the value."""
    value = os.environ.get(ENV_VAR, "").strip().lower()
    if value and value not in _VALID:
        raise ValueError(f"{ENV_VAR} must be one of {_VALID}, got {value!r}")
    if value == "numpy":
        return "numpy"
    if value == "numba":
        if not numba_available():
            raise ImportError(f"{ENV_VAR}=numba but numba is not importable")
        return "numba"
    return "numba" if numba_available() else "numpy"


ACTIVE_BACKEND = select_backend()
