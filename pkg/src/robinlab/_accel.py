"""Backend selection for the hot kernels.

Numba is used when it is importable and ``ROBINLAB_DISABLE_NUMBA`` is unset
(or ``0``).  ``ROBINLAB_THREADS`` caps the numba thread pool.  Every kernel
has a pure-numpy twin, so results never depend on numba being present.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("ROBINLAB_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

# the TBB layer shipped with some numba wheels is too old and warns on first use
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    if _DISABLED:
        raise ImportError("numba disabled by ROBINLAB_DISABLE_NUMBA")
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:
    _numba = None
    HAVE_NUMBA = False

_backend = "numba" if HAVE_NUMBA else "numpy"


def _apply_thread_cap() -> None:
    cap = os.environ.get("ROBINLAB_THREADS")
    if not (HAVE_NUMBA and cap):
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    _numba.set_num_threads(min(n, _numba.config.NUMBA_NUM_THREADS))


_apply_thread_cap()


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return _numba.njit(*args, cache=False, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


prange = _numba.prange if HAVE_NUMBA else range


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch between ``"numba"`` and ``"numpy"`` kernels at runtime."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    _backend = name
