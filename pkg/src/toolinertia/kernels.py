"""Kernel backend selection.

The compiled extension ``toolinertia._kernels`` is used when it was built;
otherwise the pure-Python ``_pykernels`` module is used.  Setting
``TOOLINERTIA_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os
from array import array

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("TOOLINERTIA_PURE_PYTHON"):
    BACKEND = "cython"
    _impl = _ckernels
else:
    BACKEND = "python"
    _impl = _pykernels


def encode(ids) -> array:
    return array("i", ids)


def occurrences(path: array, window: array) -> list[int]:
    return _impl.occurrences(path, window)


def successor_hits(paths: list, window: array) -> list[tuple[int, int]]:
    return _impl.successor_hits(paths, window)


def ngram_counts(sequences: list, order: int, skip: int) -> dict[tuple, int]:
    return _impl.ngram_counts(sequences, order, skip)
