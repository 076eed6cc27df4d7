"""Kernel backend selection.

The compiled ``_ckernels`` module is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is used. Setting ``TRIZONE_KERNELS=python``
forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load() -> ModuleType:
    if os.environ.get("TRIZONE_KERNELS", "").lower() == "python":
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels
    return _ckernels


def available() -> dict[str, ModuleType]:
    """All importable kernel implementations, keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


impl = _load()
BACKEND: str = impl.NAME

n_words = impl.n_words
pack = impl.pack
unpack = impl.unpack
pack_equal = impl.pack_equal
pack_not_equal = impl.pack_not_equal
bit_and = impl.bit_and
bit_or = impl.bit_or
bit_andnot = impl.bit_andnot
bit_not = impl.bit_not
popcount = impl.popcount
stretch_columns = impl.stretch_columns
ssim_mean = impl.ssim_mean
