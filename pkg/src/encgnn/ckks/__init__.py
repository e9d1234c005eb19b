"""Leveled RNS-CKKS backend with compiled NTT kernels."""
from .backend import CkksBackend
from .context import Context, get_context

__all__ = ["CkksBackend", "Context", "get_context"]
