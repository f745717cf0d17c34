"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``FIXHEAD_PURE=1`` to force the fallback.
"""

import os

from fixhead import _fallback

try:
    if os.environ.get("FIXHEAD_PURE", "") not in ("", "0"):
        raise ImportError("fallback forced by FIXHEAD_PURE")
    from fixhead import _kernels
except ImportError:
    _kernels = None

BACKENDS = {"python": _fallback}
if _kernels is not None:
    BACKENDS["compiled"] = _kernels

BACKEND = "compiled" if _kernels is not None else "python"
kernels = BACKENDS[BACKEND]


def get(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return kernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None
