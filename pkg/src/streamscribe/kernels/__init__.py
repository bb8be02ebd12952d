"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python implementation
when the extension is unavailable or STREAMSCRIBE_PURE is set.
"""

from __future__ import annotations

import os

if os.environ.get("STREAMSCRIBE_PURE"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pykernels as _impl

BACKEND: str = _impl.BACKEND
dtw_path = _impl.dtw_path
levenshtein = _impl.levenshtein

__all__ = ["BACKEND", "dtw_path", "levenshtein"]
