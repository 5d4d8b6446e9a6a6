"""Backend selection for the Coulomb pair kernels.

Prefers the compiled extension when it imported cleanly; falls back to the
numpy broadcasting implementation otherwise, or when WSFN_LAB_PURE_PY=1 is
set, or when the dimension exceeds the extension's small fixed buffer.
"""

import os

from . import _kernels_numpy as _np_impl

_ext_impl = None
if os.environ.get("WSFN_LAB_PURE_PY", "") != "1":
    try:
        from . import _coulomb_core as _ext_impl
    except ImportError:
        _ext_impl = None

_EXT_MAX_DIM = 64

BACKEND = "cython" if _ext_impl is not None else "numpy"


def _pick(x):
    if _ext_impl is not None and x.shape[1] <= _EXT_MAX_DIM:
        return _ext_impl
    return _np_impl


def _ascontig(a):
    import numpy as np

    return np.ascontiguousarray(a, dtype=np.float64)


def energy_self(x, eps2):
    x = _ascontig(x)
    return _pick(x).energy_self(x, eps2)


def energy_cross(x, y, eps2):
    x, y = _ascontig(x), _ascontig(y)
    return _pick(x).energy_cross(x, y, eps2)


def grad_self(x, eps2):
    x = _ascontig(x)
    return _pick(x).grad_self(x, eps2)


def grad_cross(x, y, eps2):
    x, y = _ascontig(x), _ascontig(y)
    return _pick(x).grad_cross(x, y, eps2)


def wsum_self(x, v, eps2):
    x, v = _ascontig(x), _ascontig(v)
    return _pick(x).wsum_self(x, v, eps2)


def wdiag_self(x, eps2):
    x = _ascontig(x)
    return _pick(x).wdiag_self(x, eps2)


def wdiag_cross(x, y, eps2):
    x, y = _ascontig(x), _ascontig(y)
    return _pick(x).wdiag_cross(x, y, eps2)
