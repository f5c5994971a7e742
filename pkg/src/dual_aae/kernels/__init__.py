"""Kernel backend selection.

The hot elementwise kernels exist twice: a compiled Cython extension
(`_opscy`) and a numpy reference (`ops_py`). The compiled backend is used
when it built successfully; the environment variable DUAL_AAE_KERNELS
(auto | python | compiled) overrides the choice. `benchmarks/bench_kernels.py`
compares the two.
"""

import os

from ..errors import ConfigError
from . import ops_py

try:
    from . import _opscy
except ImportError:
    _opscy = None

_KERNEL_NAMES = (
    "leaky_relu_fwd",
    "leaky_relu_bwd",
    "relu_fwd",
    "relu_bwd",
    "sigmoid_fwd",
    "sigmoid_bwd",
    "dropout_fwd",
    "dropout_bwd",
    "adam_update",
    "clip_",
)

_active = None


def available_backends():
    names = ["python"]
    if _opscy is not None:
        names.append("compiled")
    return tuple(names)


def backend():
    """Name of the backend currently bound ("python" or "compiled")."""
    return _active.BACKEND_NAME


def use_backend(name):
    """Bind the named backend's kernels as this module's functions.

    Intended for tests and benchmarks; normal code just imports the module
    and gets the import-time selection.
    """
    global _active
    if name == "python":
        _active = ops_py
    elif name == "compiled":
        if _opscy is None:
            raise ConfigError("compiled kernel backend is not available")
        _active = _opscy
    else:
        raise ConfigError(f"unknown kernel backend {name!r} "
                          "(expected 'python' or 'compiled')")
    for fname in _KERNEL_NAMES:
        globals()[fname] = getattr(_active, fname)


def _initial_choice():
    choice = os.environ.get("DUAL_AAE_KERNELS", "auto").strip().lower()
    if choice in ("auto", ""):
        return "compiled" if _opscy is not None else "python"
    if choice in ("python", "py"):
        return "python"
    if choice in ("compiled", "cy", "native"):
        return "compiled"
    raise ConfigError(f"DUAL_AAE_KERNELS={choice!r}: expected auto, python, "
                      "or compiled")


use_backend(_initial_choice())
