"""Backend selection for the event-loop kernel.

SUPERMARKET_BACKEND=numpy forces the pure-Python/numpy path;
SUPERMARKET_BACKEND=numba (the default when numba is importable) runs the
numba-compiled version of the same source.  Both paths consume identical
random streams and produce bit-identical results, so the switch is purely
a performance knob.
"""

from __future__ import annotations

import os
from contextlib import contextmanager, nullcontext

import numpy as np

from ._engine import run_replication_numba, run_replication_python

_ENV_VAR = "SUPERMARKET_BACKEND"


def backend_name() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice in ("numpy", "python"):
        return "numpy"
    if choice == "numba":
        if run_replication_numba is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return "numba"
    if choice:
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    return "numba" if run_replication_numba is not None else "numpy"


def kernel():
    """(replication callable, guard factory) for the selected backend.

    The numpy path needs integer-overflow warnings silenced per call: the
    splitmix state wraps modulo 2^64 by design.
    """
    if backend_name() == "numba":
        return run_replication_numba, nullcontext
    return run_replication_python, lambda: np.errstate(over="ignore")


@contextmanager
def forced_backend(name: str):
    """Temporarily pin the backend; tests use this to compare the paths."""
    old = os.environ.get(_ENV_VAR)
    os.environ[_ENV_VAR] = name
    try:
        yield
    finally:
        if old is None:
            os.environ.pop(_ENV_VAR, None)
        else:
            os.environ[_ENV_VAR] = old
