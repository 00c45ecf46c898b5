"""Kernel backend selection.

The compiled core is used when importable; ``GRAPHONLAB_BACKEND=python``
forces the numpy twin. Both backends agree to rounding, not bit-for-bit, so
the active backend is recorded in every run's provenance.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("GRAPHONLAB_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

sup_sq_cost = _impl.sup_sq_cost
assignment = _impl.assignment
cut_norm_enum = _impl.cut_norm_enum
inf_to_one_enum = _impl.inf_to_one_enum
weighted_tanh_sum = _impl.weighted_tanh_sum


def backends():
    """Return the importable backend modules keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _core

        found["cython"] = _core
    except ImportError:
        pass
    return found
