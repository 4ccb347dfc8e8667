"""Numba availability and selection plumbing.

Hot kernels in :mod:`alfmass.kernels` ship in two builds: numba ``@njit``
loop kernels and vectorized pure-numpy equivalents.  The numpy build is
selected when numba is not importable or when the environment variable
``ALFMASS_NO_NUMBA`` is set to a truthy value.  Both builds stay importable
whenever numba is present, so ``bench/benchmark.py`` can time them against
each other in one process.
"""

import os


def numba_requested() -> bool:
    flag = os.environ.get("ALFMASS_NO_NUMBA", "").strip().lower()
    return flag not in {"1", "true", "yes", "on"}


try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via ALFMASS_NO_NUMBA instead
    njit = None
    NUMBA_AVAILABLE = False

NUMBA_ENABLED = NUMBA_AVAILABLE and numba_requested()
