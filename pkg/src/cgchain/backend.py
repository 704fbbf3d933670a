"""Numba/numpy backend selection.

Hot inner loops are compiled with numba when available.  Setting the
environment variable ``CG_BACKEND=numpy`` forces the pure-numpy (plain
Python) fallback.  All noise is generated outside the kernels, so the
two backends follow the same sample path: kernels built from polynomial
arithmetic (the chain models) are bit-identical, while kernels calling
transcendental functions (the molecular systems) can differ in the last
ulp, since numba links its own libm.
"""

import os

_requested = os.environ.get("CG_BACKEND", "numba").lower()

USING_NUMBA = False

if _requested not in ("numpy", "python"):
    try:
        from numba import njit as _numba_njit

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False

if USING_NUMBA:

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        # Pass-through decorator, usable bare or with options.
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
