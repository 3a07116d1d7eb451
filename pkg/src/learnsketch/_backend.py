"""Kernel backend selection.

The hot loops in :mod:`learnsketch.kernels` exist twice: a numba ``@njit``
version and a pure-numpy version.  Which one runs is decided by the
``LS_BACKEND`` environment variable (``numba`` or ``numpy``) at import time,
and can be changed afterwards with :func:`set_backend`.  If numba cannot be
imported the numpy path is used regardless.
"""

import logging
import os
import warnings

logger = logging.getLogger(__name__)

try:
    import numba

    HAS_NUMBA = True
    njit = numba.njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        """Null decorator used when numba is unavailable."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


_VALID = ("numba", "numpy")


def _initial_backend():
    name = os.environ.get("LS_BACKEND", "numba").strip().lower()
    if name not in _VALID:
        logger.warning("unknown LS_BACKEND=%r, using numba", name)
        name = "numba"
    if name == "numba" and not HAS_NUMBA:
        logger.warning("numba not importable, falling back to numpy kernels")
        name = "numpy"
    return name


_backend = _initial_backend()


def get_backend():
    return _backend


def set_backend(name):
    """Switch kernel implementation; returns the previous backend name."""
    global _backend
    name = name.lower()
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    previous, _backend = _backend, name
    return previous


def configure_threads():
    """Apply ``LS_THREADS`` to numba's thread pool; returns the bound used."""
    raw = os.environ.get("LS_THREADS")
    n = max(1, int(raw)) if raw else (os.cpu_count() or 1)
    if HAS_NUMBA:
        # starting the threading layer probes TBB and warns on old versions
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", numba.NumbaWarning)
            try:
                numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
            except (ValueError, AttributeError):
                pass
    return n
