"""Kernel backend selection.

The hot Monte Carlo loops exist twice: numba-compiled per-path kernels and
a vectorized pure-numpy fallback.  The env flag HUBBARD_SDE_BACKEND picks
one ('numba' | 'numpy'); default is numba when importable.  Both backends
consume the same counter-based noise stream, so ensembles are reproducible
across backends up to floating-point summation order.
"""

from __future__ import annotations

import os

from . import numpy_kernels

_FLAG = "HUBBARD_SDE_BACKEND"


def _resolve(name: str | None = None) -> str:
    choice = (name or os.environ.get(_FLAG, "auto")).lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_FLAG} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        from . import numba_kernels  # noqa: F401
        return "numba"
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"


def get_backend(name: str | None = None):
    """Return (backend_name, module) for the requested or default backend."""
    resolved = _resolve(name)
    if resolved == "numba":
        from . import numba_kernels
        return resolved, numba_kernels
    return resolved, numpy_kernels


def evolve_w1_ensemble(*args, backend: str | None = None, **kw):
    return get_backend(backend)[1].evolve_w1_ensemble(*args, **kw)


def evolve_w2_ensemble(*args, backend: str | None = None, **kw):
    return get_backend(backend)[1].evolve_w2_ensemble(*args, **kw)
