"""Kernel backend selection.

The hot loops exist twice: numba ``@njit`` kernels (default) and a pure-numpy
vectorised fallback.  Set ``THORNWALK_BACKEND=numpy`` to force the fallback,
e.g. on platforms without numba or when debugging the kernels.
"""

import os

_requested = os.environ.get("THORNWALK_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"THORNWALK_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        import numba

        if "NUMBA_THREADING_LAYER" not in os.environ:
            # skip probing an outdated system TBB
            numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        BACKEND = "numpy"
else:
    BACKEND = "numpy"

HAVE_NUMBA = BACKEND == "numba"


def backend() -> str:
    """Name of the active kernel backend."""
    return BACKEND


def set_threads(n: int) -> int:
    """Set the worker count for the numba backend; returns the count in effect.

    Results never depend on this value (per-path counter-based streams and
    fixed-order reductions).
    """
    n = max(1, int(n))
    if HAVE_NUMBA:
        import numba

        n = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(n)
    return n
