"""Kernel backend selection.

The compiled extension is preferred when present; the pure-numpy fallback
keeps the package fully functional from source.  Set DGDTRACK_BACKEND to
``compiled`` or ``python`` to force a choice (``compiled`` raises if the
extension is missing); default is ``auto``.
"""

from __future__ import annotations

import os

_requested = os.environ.get("DGDTRACK_BACKEND", "auto")

if _requested not in ("auto", "compiled", "python"):
    raise ImportError(f"DGDTRACK_BACKEND must be auto|compiled|python, got {_requested!r}")

if _requested == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as _impl

BACKEND = "compiled" if _impl.COMPILED else "python"
dgd_inner_steps = _impl.dgd_inner_steps
