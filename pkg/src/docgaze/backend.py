"""Numerical backend selection.

Hot kernels ship in two variants: numba-compiled loops and vectorized
numpy. Set DOCGAZE_BACKEND=numpy to force the fallback (e.g. on machines
where numba is unavailable or JIT warmup is unwanted); any other value,
or leaving it unset, uses numba when it imports cleanly.
"""

import os

_requested = os.environ.get("DOCGAZE_BACKEND", "numba").strip().lower()

if _requested == "numpy":
    USING_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
