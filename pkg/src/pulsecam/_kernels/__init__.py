"""Hot-loop kernels: compiled extension when available, numpy fallback otherwise.

Set PULSECAM_PURE=1 to force the pure-Python implementation (used by the
benchmark and the equivalence tests).
"""

import os

from . import _fallback

if os.environ.get("PULSECAM_PURE"):
    _impl = _fallback
    IMPLEMENTATION = "pure"
else:
    try:
        from . import _native as _impl

        IMPLEMENTATION = "native"
    except ImportError:
        _impl = _fallback
        IMPLEMENTATION = "pure"

roi_means = _impl.roi_means
lk_level = _impl.lk_level
