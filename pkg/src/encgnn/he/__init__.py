"""Homomorphic backend contract, exact simulator and profiler."""
from .api import (
    CMP_COEFFS,
    STEP_COEFFS,
    Backend,
    Ciphertext,
    HEParams,
    KeySet,
    Plaintext,
    cmp_depth,
    default_rotation_steps,
    poly_depth,
)
from .errors import (
    AlignmentError,
    CapacityError,
    DepthExhaustedError,
    EncodingError,
    HEError,
    LayoutError,
    ParameterError,
    RotationKeyError,
)
from .profile import COUNTERS, OpProfile, Profiler
from .sim import SimBackend

__all__ = [
    "AlignmentError", "Backend", "CMP_COEFFS", "COUNTERS", "STEP_COEFFS", "CapacityError", "Ciphertext",
    "DepthExhaustedError", "EncodingError", "HEError", "HEParams", "KeySet", "LayoutError",
    "OpProfile", "ParameterError", "Plaintext", "Profiler", "RotationKeyError", "SimBackend",
    "cmp_depth", "default_rotation_steps", "make_backend", "poly_depth",
]


def make_backend(name: str, params: HEParams, seed: int = 0, profiler: Profiler | None = None) -> Backend:
    if name == "sim":
        return SimBackend(params, seed, profiler)
    if name == "ckks":
        from ..ckks import CkksBackend

        return CkksBackend(params, seed, profiler)
    raise ParameterError(f"unknown backend {name!r}")
