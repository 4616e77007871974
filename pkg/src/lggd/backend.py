"""Kernel backend selection.

Set ``LGGD_BACKEND=numpy`` to force the pure-numpy kernels, or
``LGGD_BACKEND=numba`` to require the jitted ones (ImportError if numba
is unavailable). Default: numba when importable, numpy otherwise.
"""

import os

from . import _kernels_numpy

_VALID = ("numba", "numpy")


def _load(name):
    if name == "numpy":
        return _kernels_numpy
    from . import _kernels_numba

    return _kernels_numba


def select_backend():
    name = os.environ.get("LGGD_BACKEND", "").strip().lower()
    if name:
        if name not in _VALID:
            raise ValueError(f"LGGD_BACKEND must be one of {_VALID}, got {name!r}")
        return name, _load(name)
    try:
        return "numba", _load("numba")
    except ImportError:
        return "numpy", _kernels_numpy


BACKEND_NAME, kernels = select_backend()


def get_kernels(name=None):
    """Kernel module for an explicit backend name (benchmarks/tests)."""
    if name is None:
        return kernels
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    return _load(name)
