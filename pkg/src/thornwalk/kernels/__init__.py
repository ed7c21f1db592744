"""Hot loops, dispatched to the numba or the numpy implementation.

The numba kernels are compiled on first use (and cached on disk).  The
numpy fallback mirrors them with the same random streams; the two agree
statistically, and each is deterministic on its own.
"""

from .._backend import BACKEND

if BACKEND == "numba":
    from ._nb import (  # noqa: F401
        contains_points,
        dist_points,
        em_kernel,
        em_record_kernel,
        polyline_hits_thorn,
        wl_kernel,
        wos_kernel,
    )
else:
    from ._np import (  # noqa: F401
        contains_points,
        dist_points,
        em_kernel,
        em_record_kernel,
        polyline_hits_thorn,
        wl_kernel,
        wos_kernel,
    )
