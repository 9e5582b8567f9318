"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set ``DOEOPT_PURE_PYTHON=1`` to force the fallback (used by the parity tests
and the benchmark). ``BACKEND`` reports which implementation is live.
"""

import os

from . import _fallback

if os.environ.get("DOEOPT_PURE_PYTHON", "") == "1":
    _impl = _fallback
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND
nondominated_mask = _impl.nondominated_mask
hv2d = _impl.hv2d
hv3d = _impl.hv3d

__all__ = ["BACKEND", "nondominated_mask", "hv2d", "hv3d"]
