"""Backend selection for the hot kernels.

The compiled extension (``_ckernels``) is used when it imports; otherwise the
pure-Python module is used.  Set ``PWEXPAND_BACKEND=python`` to force the
fallback.
"""

import os

from . import _pykernels

_forced = os.environ.get("PWEXPAND_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _pykernels
        BACKEND = "python"

STATUS_OK = _pykernels.STATUS_OK
STATUS_BOUNDARY = _pykernels.STATUS_BOUNDARY
STATUS_ESCAPE = _pykernels.STATUS_ESCAPE

clip_polygon = _impl.clip_polygon
polygon_area = _impl.polygon_area
clip_area_boxes = _impl.clip_area_boxes
orbit_hist = _impl.orbit_hist
step_points = _impl.step_points

__all__ = [
    "BACKEND",
    "STATUS_OK",
    "STATUS_BOUNDARY",
    "STATUS_ESCAPE",
    "clip_polygon",
    "polygon_area",
    "clip_area_boxes",
    "orbit_hist",
    "step_points",
]
