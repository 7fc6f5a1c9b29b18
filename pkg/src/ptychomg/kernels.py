"""Backend selection for the hot kernels.

The compiled extension ``ptychomg._kernels`` is used when it has been built;
otherwise the numpy fallback in ``ptychomg._kernels_py`` is used. Setting the
environment variable ``PTYCHOMG_KERNELS=python`` forces the fallback.

Backends agree to floating-point rounding, not bitwise; results are
deterministic within a backend.
"""

import importlib
import os
from contextlib import contextmanager

from . import _kernels_py


def _load_compiled():
    try:
        return importlib.import_module("ptychomg._kernels")
    except ImportError:
        return None


_compiled = _load_compiled()


def available_backends():
    return ("cython", "python") if _compiled is not None else ("python",)


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython" or "python").

    ``None`` selects the default: compiled if present, unless overridden by
    ``PTYCHOMG_KERNELS``.
    """
    if name is None:
        name = os.environ.get("PTYCHOMG_KERNELS", "cython" if _compiled else "python")
    name = name.lower()
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


KERNELS = ("gather_windows", "scatter_add_windows", "modulus_project", "distance_residual",
           "intensity_residual", "restrict4", "prolong2")


def set_backend(name=None):
    """Rebind the module-level kernels to backend ``name``; returns its name."""
    global BACKEND
    mod = get_backend(name)
    for k in KERNELS:
        globals()[k] = getattr(mod, k)
    BACKEND = "python" if mod is _kernels_py else "cython"
    return BACKEND


@contextmanager
def use_backend(name):
    """Temporarily switch backends (not thread safe)."""
    previous = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


BACKEND = None
set_backend()
