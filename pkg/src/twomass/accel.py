"""Numba acceleration switch.

All hot kernels in this package are written as plain scalar/loop numpy code
and decorated with :func:`njit` from this module.  By default the decorator
is numba's ``njit`` (nopython, cached), so the simulation loop runs compiled.
Setting the environment variable ``TWOMASS_NUMBA=0`` before import turns the
decorator into a no-op and every kernel runs as ordinary Python over numpy
arrays -- roughly three orders of magnitude slower, but executing the exact
same floating-point operation sequence.  ``benchmarks/bench_numba_vs_numpy.py``
compares the two paths.
"""

import os

NUMBA_ENABLED = os.environ.get("TWOMASS_NUMBA", "1") != "0"

if NUMBA_ENABLED:
    try:
        from numba import njit as _numba_njit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def njit(*args, **kwargs):
        return _numba_njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        # bare @njit
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        # @njit(cache=True, ...)
        def decorate(fn):
            return fn

        return decorate
