"""Kernel backend selection.

Hot numeric loops exist in two flavors: numba-compiled scalar loops and
vectorized numpy fallbacks. The environment variable ``T2MAX_BACKEND``
selects which one public functions dispatch to:

* ``auto`` (default): numba when importable, numpy otherwise
* ``numba``: require numba, fail at import if unavailable
* ``numpy``: force the vectorized fallback even when numba is present

Loop kernels are decorated with :func:`jit` whenever numba is importable,
independent of the dispatch flag, so benchmarks can time both flavors in
one process. Compilation is lazy, so an unused kernel costs nothing.
"""

import os

_FLAG = os.environ.get("T2MAX_BACKEND", "auto").strip().lower() or "auto"

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-less hosts
    numba = None
    HAS_NUMBA = False

if _FLAG == "auto":
    USE_NUMBA = HAS_NUMBA
elif _FLAG == "numba":
    if not HAS_NUMBA:
        raise ImportError("T2MAX_BACKEND=numba but numba is not importable")
    USE_NUMBA = True
elif _FLAG == "numpy":
    USE_NUMBA = False
else:
    raise ValueError(
        f"unrecognized T2MAX_BACKEND={_FLAG!r}; expected auto, numba, or numpy"
    )


def jit(func):
    """Compile ``func`` with numba when available, otherwise return it unchanged."""
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
