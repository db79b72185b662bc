"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback.  ``QKAF_BACKEND=python`` forces the fallback and
``QKAF_BACKEND=cython`` makes a missing extension an error.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def get_backend(name=None):
    """Return ``(name, module)`` for the requested or default backend."""
    if name is None:
        name = os.environ.get("QKAF_BACKEND", "").strip().lower() or None
    if name is None:
        name = "cython" if _compiled is not None else "python"
    if name not in _BACKENDS:
        if name == "cython":
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
    return name, _BACKENDS[name]


def available_backends():
    return sorted(_BACKENDS)


BACKEND, kernels = get_backend()
