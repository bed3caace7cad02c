"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it was built; otherwise, or
when ``NWDKIT_PURE_PYTHON`` is set to a non-empty value, the numpy fallback
in ``_pykernels`` is used. Both expose the same four functions.
"""
import os

from . import _pykernels

if os.environ.get("NWDKIT_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
intersect_count = _impl.intersect_count
kmeanspp_indices = _impl.kmeanspp_indices
lloyd = _impl.lloyd
dispersion = _impl.dispersion


def backends():
    """All importable backends, keyed by name (for tests and benchmarks)."""
    found = {"python": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
