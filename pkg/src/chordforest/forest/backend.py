"""Split-kernel backend selection.

The compiled Cython kernel is used when importable; otherwise the numpy
fallback.  ``CHORDFOREST_BACKEND=python|compiled`` forces a choice
(``compiled`` raises if the extension is unavailable).  Both backends are
bit-identical, so the choice affects speed only.
"""

from __future__ import annotations

import os

from . import _split_py

_requested = os.environ.get("CHORDFOREST_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "python", "compiled"):
    raise RuntimeError(f"CHORDFOREST_BACKEND must be auto|python|compiled, got {_requested!r}")

_compiled = None
if _requested in ("auto", "compiled"):
    try:
        from . import _split_cy as _compiled
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError("CHORDFOREST_BACKEND=compiled but the extension is not built")
        _compiled = None

if _compiled is not None:
    BACKEND = "compiled"
    best_split = _compiled.best_split
    partition = _compiled.partition
else:
    BACKEND = "python"
    best_split = _split_py.best_split
    partition = _split_py.partition
