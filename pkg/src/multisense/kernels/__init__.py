"""Hot-kernel backend selection.

Imports the compiled extension when present, otherwise the numpy/pure
fallback. Set MULTISENSE_PURE=1 to force the fallback (used by the parity
tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("MULTISENSE_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

trigger_scan = _impl.trigger_scan
modal_synth = _impl.modal_synth

__all__ = ["trigger_scan", "modal_synth", "BACKEND", "_pure"]
