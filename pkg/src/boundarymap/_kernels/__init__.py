"""Kernel backend selection.

The compiled kernel is preferred when the extension built; setting the
environment variable ``BOUNDARYMAP_PURE_PYTHON=1`` forces the pure-Python
fallback (useful for the backend benchmark and for debugging).
"""
from __future__ import annotations

import os

import numpy as np

from ..core import InvalidInputError
from . import fallback as _fallback

if os.environ.get("BOUNDARYMAP_PURE_PYTHON", "") not in ("", "0"):
    _backend = _fallback
else:
    try:
        from . import _native as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _fallback

BACKEND_NAME: str = _backend.BACKEND_NAME


def available_backends() -> dict[str, object]:
    """Importable backends keyed by name (native omitted when not built)."""
    out = {"fallback": _fallback}
    try:
        from . import _native

        out["native"] = _native
    except ImportError:
        pass
    return out


def raycast(origin, points, resolution, max_range, clip_lo, clip_hi, backend=None):
    """Validated front door to the active backend's ``raycast_grid``.

    ``origin`` and ``points`` are world-space meters; see
    ``fallback.raycast_grid`` for the traversal contract.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(origin)):
        raise InvalidInputError("non-finite sensor origin")
    if points.size and not np.all(np.isfinite(points)):
        raise InvalidInputError("non-finite scan point")
    if max_range <= 0.0:
        raise InvalidInputError(f"max_range must be positive, got {max_range}")
    impl = _backend if backend is None else backend
    return impl.raycast_grid(origin, points, resolution, max_range, clip_lo, clip_hi)
