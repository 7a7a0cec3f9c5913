"""Kernel backend selection.

The compiled extension is used when importable; setting
``BIOT_GENEO_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if os.environ.get("BIOT_GENEO_PURE_PYTHON") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

kernels = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def get_kernels(name=None):
    if name is None:
        return kernels
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {available_backends()}") from None
