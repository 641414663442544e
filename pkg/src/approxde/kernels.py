"""Kernel backend selection.

The compiled extension is used when it was built; setting the environment
variable ``APPROXDE_PURE_PYTHON=1`` forces the numpy fallback.
"""
import importlib
import os

from . import _pykernels


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("approxde._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    out = ["python"]
    try:
        load_backend("cython")
        out.insert(0, "cython")
    except ImportError:
        pass
    return out


BACKEND = "python"
_impl = _pykernels
if not os.environ.get("APPROXDE_PURE_PYTHON"):
    try:
        _impl = load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        pass

eval_terms = _impl.eval_terms
max_pair_norm = _impl.max_pair_norm
