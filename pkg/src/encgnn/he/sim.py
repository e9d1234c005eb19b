"""Exact-arithmetic backend.

Payloads are numpy object arrays of :class:`fractions.Fraction` holding the
logical slot vector, so every circuit is evaluated without rounding.  The
simulator enforces the same level, scale and slot contracts as CKKS but carries
no noise.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .api import Backend, Ciphertext, HEParams, KeySet, Plaintext
from .errors import RotationKeyError
from .profile import Profiler


def to_fractions(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object).reshape(-1)
    return np.array([v if isinstance(v, Fraction) else Fraction(float(v)) for v in arr], dtype=object)


class SimBackend(Backend):
    name = "sim"

    def __init__(self, params: HEParams, seed: int = 0, profiler: Profiler | None = None):
        super().__init__(params, seed, profiler)

    def level_scale(self, level: int) -> float:
        return self.params.scale

    def _keygen(self, steps):
        return {"kind": "sim", "steps": sorted(steps)}

    def _encrypt(self, values, level, keys):
        return to_fractions(values), self.level_scale(level)

    def _decrypt(self, ct, keys):
        return np.array([float(v) for v in ct.payload])

    def decrypt_exact(self, ct: Ciphertext, keys: KeySet) -> np.ndarray:
        self.decrypt(ct, keys)  # layout checks
        return ct.payload.copy()

    def _encode(self, values, level, scale):
        return to_fractions(values)

    def _trivial(self, values, level, scale):
        return to_fractions(values)

    def _add(self, a, b, negate_b):
        return a.payload - b.payload if negate_b else a.payload + b.payload

    def _add_plain(self, a, p):
        return a.payload + p.payload

    def _negate(self, a):
        return -a.payload

    def _mult(self, a, b, keys):
        return a.payload * b.payload, a.scale

    def _mult_plain(self, a, p):
        return a.payload * p.payload, a.scale

    def _mult_const(self, a, c):
        c = c if isinstance(c, Fraction) else Fraction(float(c))
        return a.payload * c, a.scale

    def _rotate(self, a, step, keys):
        if step not in keys.rotation_steps:
            raise RotationKeyError(f"no rotation key for step {step}")
        return np.roll(a.payload, -step)

    def _rotate_plan(self, a, plan, shift, keys):
        # the payload is the logical vector, so apply the net logical shift
        for step in plan:
            if step not in keys.rotation_steps:
                raise RotationKeyError(f"no rotation key for step {step}")
        return np.roll(a.payload, -shift)

    def _mod_switch(self, a, level):
        return a.payload, a.scale
