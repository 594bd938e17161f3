"""Selection between the numba-compiled kernels and their numpy fallbacks.

Every hot loop in :mod:`stpod.kernels` exists in two interchangeable forms: a
numba ``@njit`` version and a pure-numpy version. Which one runs is decided
once at import time from the ``STPOD_BACKEND`` environment variable and can be
changed at runtime with :func:`set_backend` (the benchmark command and the
test suite do this).

``STPOD_BACKEND`` accepts ``auto`` (default: numba when importable), ``numba``
and ``numpy``. Results are reproducible bit for bit when rerun on the same
backend; the two backends agree to near machine precision but are not
guaranteed bitwise identical to each other.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but stay importable
    HAS_NUMBA = False

_CHOICES = ("auto", "numba", "numpy")


def _resolve(name: str) -> str:
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}; choose from {_CHOICES}")
    if name == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return name


_active = _resolve(os.environ.get("STPOD_BACKEND", "auto").strip().lower() or "auto")


def active_backend() -> str:
    """Name of the kernel backend currently in use ("numba" or "numpy")."""
    return _active


def set_backend(name: str) -> str:
    """Switch the kernel backend; returns the previously active one."""
    global _active
    previous = _active
    _active = _resolve(name)
    return previous


@contextmanager
def using_backend(name: str):
    """Context manager that temporarily switches the kernel backend."""
    previous = set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
