"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise the
pure-Python ``_pure`` module.  ``PROPSHARE_BACKEND=python`` forces the
fallback at import time and :func:`set_backend` switches at runtime.
"""
import os

from . import _pure

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _pure}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

kernels = _pure
name = "python"


def available():
    return sorted(_BACKENDS)


def set_backend(which):
    """Select ``"cython"`` or ``"python"`` kernels; returns the previous name."""
    global kernels, name
    if which not in _BACKENDS:
        raise ValueError(f"backend {which!r} unavailable; have {available()}")
    previous = name
    kernels = _BACKENDS[which]
    name = which
    return previous


def get(which):
    return _BACKENDS[which]


_requested = os.environ.get("PROPSHARE_BACKEND", "").strip().lower()
if _requested:
    set_backend(_requested)
elif _compiled is not None:
    set_backend("cython")
