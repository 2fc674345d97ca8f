"""Kernel backend selection.

The compiled Cython extension is preferred when present; the numpy fallback
is used otherwise (or when ATTRIPROF_FORCE_FALLBACK=1 is set). Both expose
the same functions and produce identical arrays.
"""

import os

from . import fallback

_force = os.environ.get("ATTRIPROF_FORCE_FALLBACK", "") == "1"

if not _force:
    try:
        from . import _native as _impl

        HAVE_NATIVE = True
    except ImportError:
        _impl = fallback
        HAVE_NATIVE = False
else:
    _impl = fallback
    HAVE_NATIVE = False

backend = _impl


def active_backend() -> str:
    """Name of the lane in use: 'native' or 'fallback'."""
    return "native" if backend is not fallback else "fallback"


def get_backend(name: str):
    """Fetch a lane by name (for tests and benchmarks)."""
    if name == "fallback":
        return fallback
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown backend {name!r}")
