"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
reference implementation is the fallback. Set SPIKEMANIFOLD_BACKEND to
``fast`` or ``reference`` to force one (forcing ``fast`` raises if the
extension is not built, rather than silently degrading).
"""

import os

from ..errors import ConfigError
from . import reference


def _load_fast():
    from . import _fast
    return _fast


_forced = os.environ.get("SPIKEMANIFOLD_BACKEND", "").strip().lower()

if _forced == "reference":
    backend = reference
    BACKEND_NAME = "reference"
elif _forced == "fast":
    backend = _load_fast()
    BACKEND_NAME = "fast"
elif _forced == "":
    try:
        backend = _load_fast()
        BACKEND_NAME = "fast"
    except ImportError:
        backend = reference
        BACKEND_NAME = "reference"
else:
    raise ConfigError(
        f"SPIKEMANIFOLD_BACKEND must be 'fast' or 'reference', "
        f"got {_forced!r}")


def get_backend(name=None):
    """Return a kernel module by name; None gives the active one."""
    if name is None:
        return backend
    if name == "reference":
        return reference
    if name == "fast":
        return _load_fast()
    raise ConfigError(f"unknown backend {name!r}")
