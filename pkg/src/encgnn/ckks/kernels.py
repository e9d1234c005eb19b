"""Selects the modular kernel implementation at import time.

The compiled extension is preferred; set ``ENCGNN_PURE_PYTHON=1`` to force the
numpy fallback.
"""
from __future__ import annotations

import importlib
import os
from types import ModuleType

from . import _kernels_py


def _load() -> ModuleType:
    if os.environ.get("ENCGNN_PURE_PYTHON") == "1":
        return _kernels_py
    try:
        return importlib.import_module("encgnn.ckks._kernels")
    except ImportError:
        return _kernels_py


impl: ModuleType = _load()
fallback: ModuleType = _kernels_py


def use(name: str) -> ModuleType:
    """Switch the active kernels (``"cython"`` or ``"numpy"``); returns the previous module."""
    global impl
    prev = impl
    if name == "numpy":
        impl = _kernels_py
    elif name == "cython":
        impl = importlib.import_module("encgnn.ckks._kernels")
    else:
        raise ValueError(f"unknown kernel implementation {name!r}")
    return prev


def available() -> list[str]:
    names = ["numpy"]
    try:
        importlib.import_module("encgnn.ckks._kernels")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names
