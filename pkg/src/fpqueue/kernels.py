"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``FPQUEUE_PURE_PYTHON=1`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("FPQUEUE_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _impl = _fallback

IMPLEMENTATION: str = _impl.IMPLEMENTATION
first_busy_period = _impl.first_busy_period
hitting_times = _impl.hitting_times

fallback = _fallback


def compiled():
    """The compiled module, or None if it was not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
