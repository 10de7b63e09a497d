"""Numba switch.

Hot kernels are compiled with numba when it is importable and the environment
variable ``ESP_MARL_NUMBA`` is not set to ``0``. Otherwise every kernel runs on
its pure-numpy twin. Both paths share one call signature.
"""

import os

_flag = os.environ.get("ESP_MARL_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba  # noqa: F401
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested


def jit(fn):
    """Compile ``fn`` in nopython mode; returns ``None`` if numba is unavailable."""
    if not HAVE_NUMBA:
        return None
    return njit(cache=True, nogil=True)(fn)
