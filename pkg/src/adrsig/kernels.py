"""Backend selection for the numeric kernels.

The compiled extension ``adrsig._ckernels`` is used when it imports; setting
``ADRSIG_PURE_PYTHON=1`` forces the pure Python fallback.
"""
import os

from adrsig import _pykernels

if os.environ.get("ADRSIG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from adrsig import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

betainc = _impl.betainc
t_sf = _impl.t_sf
t_sf_many = _impl.t_sf_many
group_counts = _impl.group_counts

__all__ = ["BACKEND", "betainc", "t_sf", "t_sf_many", "group_counts"]
