"""Kernel backend selection.

Hot trajectory loops exist in two functionally equivalent builds: a
numba ``@njit`` build of the explicit-loop implementation and a
vectorized pure-numpy implementation.  The environment variable
``DRIFTLAB_BACKEND`` picks which one the optimizer dispatches to:

* ``numba``  - require numba, raise if it cannot be imported
* ``numpy``  - force the pure-numpy fallback
* ``auto``   - (default) use numba when importable, else numpy

The choice is made once at import time; ``active_backend()`` reports it.
Both builds consume identical pre-drawn noise arrays, so switching the
backend changes results only through floating-point summation order.
Agreement is asserted in tests and measured in
``benchmarks/bench_kernels.py``, which exercises the two builds side by
side independently of the flag.
"""

import os

_MODE = os.environ.get("DRIFTLAB_BACKEND", "auto").strip().lower()
if _MODE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"DRIFTLAB_BACKEND must be 'auto', 'numba', or 'numpy', got {_MODE!r}"
    )

HAS_NUMBA = False
try:
    from numba import njit as _numba_njit

    HAS_NUMBA = True
except ImportError:
    if _MODE == "numba":
        raise RuntimeError("DRIFTLAB_BACKEND=numba but numba is not importable")

#: True when the optimizer should dispatch to the compiled kernels.
USE_NUMBA = HAS_NUMBA and _MODE != "numpy"


def active_backend():
    """Name of the backend the optimizer dispatches to ('numba' or 'numpy')."""
    return "numba" if USE_NUMBA else "numpy"


def jit_kernel(func):
    """Return a numba-compiled version of ``func`` when numba is importable.

    Compilation is lazy (first call) and disk-cached.  When numba is not
    available the function is returned unchanged so callers can still
    reference a single object.
    """
    if HAS_NUMBA:
        return _numba_njit(cache=True, nogil=True)(func)
    return func
