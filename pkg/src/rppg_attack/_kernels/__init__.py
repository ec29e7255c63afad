"""Convolution kernel backend, chosen once at import.

The compiled extension is preferred; set ``RPPG_ATTACK_PURE_PYTHON=1`` to
force the numpy fallback (useful for benchmarking and for platforms where the
extension was not built).
"""
import os

from . import _fallback

if os.environ.get("RPPG_ATTACK_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _conv3d as _compiled
    except ImportError:  # extension not built
        _compiled = None

if _compiled is not None:
    conv3d_forward = _compiled.conv3d_forward
    conv3d_backward = _compiled.conv3d_backward
    BACKEND = "cython"
else:
    conv3d_forward = _fallback.conv3d_forward
    conv3d_backward = _fallback.conv3d_backward
    BACKEND = "python"

__all__ = ["BACKEND", "conv3d_forward", "conv3d_backward"]
