"""Backend contract shared by the CKKS implementation and the exact simulator.

Slot layout: a logical vector of width ``w`` is tiled periodically across all
``N/2`` slots.  Left rotations then act cyclically on the logical vector as long
as the read position stays inside the tiled region; ``Ciphertext.valid`` counts
the leading slots that still hold the tiled pattern.  When ``w`` divides the slot
count the tiling is exact and rotations never invalidate anything.
"""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from numbers import Real
from typing import Any, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    CapacityError,
    DepthExhaustedError,
    LayoutError,
    ParameterError,
    RotationKeyError,
)
from .profile import OpProfile, Profiler

SCALE_RTOL = 2.0**-20

# Soft step on [-1, 1]: P(-1)=0, P(0)=1/2, P(1)=1.
CMP_COEFFS = (0.5, 0.75, 0.0, -0.25)
# Odd sharpening step 2P(x) - 1: maps [-1, 1] onto itself, fixed points -1, 0, 1.
STEP_COEFFS = (0.0, 1.5, 0.0, -0.5)


@dataclass(frozen=True)
class HEParams:
    """Ring degree, modulus chain and encoding scale.

    ``prime_bits`` lists the base prime, then one prime per level (dropped by
    rescaling, top level last), then the special key-switching prime.
    """

    ring_degree: int
    prime_bits: tuple[int, ...]
    scale_bits: int = 40

    def __post_init__(self):
        object.__setattr__(self, "prime_bits", tuple(int(b) for b in self.prime_bits))
        self.validate()

    @property
    def levels(self) -> int:
        return len(self.prime_bits) - 2

    @property
    def slots(self) -> int:
        return self.ring_degree // 2

    @property
    def scale(self) -> float:
        return float(2**self.scale_bits)

    def validate(self) -> None:
        n = self.ring_degree
        if n < 8 or n & (n - 1):
            raise ParameterError(f"ring_degree must be a power of two >= 8, got {n}")
        if len(self.prime_bits) < 3:
            raise ParameterError("need a base prime, at least one level prime and a special prime")
        for b in self.prime_bits:
            if not 20 <= b <= 61:
                raise ParameterError(f"prime bit-size {b} outside [20, 61]")
        if self.scale_bits > min(self.prime_bits[:-1]) + 1:
            raise ParameterError("scale_bits exceeds the smallest data prime")
        if self.prime_bits[-1] < max(self.prime_bits[:-1]):
            raise ParameterError("special prime must be at least as wide as every data prime")

    @classmethod
    def for_depth(cls, depth: int, ring_degree: int = 2**13, scale_bits: int = 40,
                  base_bits: int = 60, special_bits: int = 60) -> "HEParams":
        if depth < 1:
            raise ParameterError("depth must be >= 1")
        return cls(ring_degree, (base_bits,) + (scale_bits,) * depth + (special_bits,), scale_bits)

    def to_json(self) -> dict:
        return {"ring_degree": self.ring_degree, "prime_bits": list(self.prime_bits),
                "scale_bits": self.scale_bits}

    @classmethod
    def from_json(cls, obj: dict | str) -> "HEParams":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(int(obj["ring_degree"]), tuple(obj["prime_bits"]), int(obj.get("scale_bits", 40)))
        except KeyError as exc:
            raise ParameterError(f"missing HE parameter field {exc}") from None

    @classmethod
    def preset(cls, name: str) -> "HEParams":
        try:
            text = resources.files("encgnn.data").joinpath(f"{name}.json").read_text()
        except FileNotFoundError:
            raise ParameterError(f"unknown parameter preset {name!r}") from None
        return cls.from_json(text)


@dataclass(frozen=True, eq=False)
class Plaintext:
    payload: Any
    scale: float
    level: int
    slot_count: int


@dataclass(frozen=True, eq=False)
class Ciphertext:
    payload: Any
    level: int
    scale: float
    slot_count: int
    valid: int


@dataclass(eq=False)
class KeySet:
    params: HEParams
    seed: int
    rotation_steps: frozenset[int]
    material: Any = None

    @property
    def rotation_key_count(self) -> int:
        return len(self.rotation_steps)


def default_rotation_steps(params: HEParams) -> frozenset[int]:
    steps = set()
    k = 1
    while k < params.slots:
        steps.update((k, -k))
        k *= 2
    return frozenset(steps)


def _as_values(v) -> np.ndarray:
    arr = np.asarray(v, dtype=object if _has_fraction(v) else np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.dtype != object and not np.all(np.isfinite(arr)):
        raise ValueError("slot vectors must be finite")
    return arr


def _has_fraction(v) -> bool:
    return isinstance(v, (list, tuple, np.ndarray)) and any(isinstance(x, Fraction) for x in np.ravel(np.asarray(v, dtype=object)))


class Backend(ABC):
    """Public operations check the contract and charge the profiler, then
    delegate to the ``_``-prefixed primitives of the concrete backend."""

    name = "abstract"

    def __init__(self, params: HEParams, seed: int = 0, profiler: Profiler | None = None):
        params.validate()
        self.params = params
        self.seed = int(seed)
        self.profiler = profiler or Profiler(params.levels)

    # -- primitives supplied by subclasses ---------------------------------
    @abstractmethod
    def _keygen(self, steps: frozenset[int]) -> Any: ...

    @abstractmethod
    def _encrypt(self, values: np.ndarray, level: int, keys: KeySet) -> tuple[Any, float]: ...

    @abstractmethod
    def _decrypt(self, ct: Ciphertext, keys: KeySet) -> np.ndarray: ...

    @abstractmethod
    def _encode(self, values: np.ndarray, level: int, scale: float) -> Any: ...

    @abstractmethod
    def _trivial(self, values: np.ndarray, level: int, scale: float) -> Any: ...

    @abstractmethod
    def _add(self, a: Ciphertext, b: Ciphertext, negate_b: bool) -> Any: ...

    @abstractmethod
    def _add_plain(self, a: Ciphertext, p: Plaintext) -> Any: ...

    @abstractmethod
    def _negate(self, a: Ciphertext) -> Any: ...

    @abstractmethod
    def _mult(self, a: Ciphertext, b: Ciphertext, keys: KeySet) -> tuple[Any, float]: ...

    @abstractmethod
    def _mult_plain(self, a: Ciphertext, p: Plaintext) -> tuple[Any, float]: ...

    @abstractmethod
    def _mult_const(self, a: Ciphertext, c) -> tuple[Any, float]: ...

    @abstractmethod
    def _rotate(self, a: Ciphertext, step: int, keys: KeySet) -> Any: ...

    @abstractmethod
    def _mod_switch(self, a: Ciphertext, level: int) -> tuple[Any, float]: ...

    @abstractmethod
    def level_scale(self, level: int) -> float:
        """Scale carried by fresh ciphertexts at ``level``."""

    # -- keys and encryption ---------------------------------------------------
    def keygen(self, rotation_steps: Sequence[int] | None = None) -> KeySet:
        steps = default_rotation_steps(self.params) if rotation_steps is None else frozenset(int(s) for s in rotation_steps)
        if 0 in steps:
            steps = steps - {0}
        return KeySet(self.params, self.seed, steps, self._keygen(steps))

    def encrypt(self, v, keys: KeySet, level: int | None = None) -> Ciphertext:
        values = _as_values(v)
        if len(values) > self.params.slots:
            raise CapacityError(f"vector of length {len(values)} exceeds {self.params.slots} slots")
        if len(values) == 0:
            raise CapacityError("cannot encrypt an empty vector")
        level = self.params.levels if level is None else int(level)
        if not 0 <= level <= self.params.levels:
            raise ParameterError(f"level {level} outside [0, {self.params.levels}]")
        payload, scale = self._encrypt(values, level, keys)
        return self._new(payload, level, scale, len(values), self.params.slots)

    def decrypt(self, ct: Ciphertext, keys: KeySet) -> np.ndarray:
        if ct.valid < ct.slot_count:
            raise LayoutError(
                f"only {ct.valid} leading slots are valid but the logical width is {ct.slot_count}"
            )
        return self._decrypt(ct, keys)

    def encode(self, v, level: int, scale: float | None = None) -> Plaintext:
        values = _as_values(v)
        if len(values) > self.params.slots:
            raise CapacityError(f"vector of length {len(values)} exceeds {self.params.slots} slots")
        scale = self.level_scale(level) if scale is None else scale
        return Plaintext(self._encode(values, level, scale), scale, level, len(values))

    def const_like(self, x: Ciphertext, value) -> Ciphertext:
        """Noise-free ciphertext holding ``value`` in every slot, aligned with ``x``."""
        values = np.full(x.slot_count, value, dtype=object if isinstance(value, Fraction) else np.float64)
        return self._new(self._trivial(values, x.level, x.scale), x.level, x.scale, x.slot_count, x.valid)

    # -- arithmetic --------------------------------------------------------------
    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_pair(a, b)
        self.profiler.charge("add")
        return self._new(self._add(a, b, False), a.level, a.scale, a.slot_count, min(a.valid, b.valid))

    def sub(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_pair(a, b)
        self.profiler.charge("add")
        return self._new(self._add(a, b, True), a.level, a.scale, a.slot_count, min(a.valid, b.valid))

    def negate(self, a: Ciphertext) -> Ciphertext:
        return self._new(self._negate(a), a.level, a.scale, a.slot_count, a.valid)

    def add_plain(self, a: Ciphertext, p: Plaintext) -> Ciphertext:
        if p.level != a.level:
            raise AlignmentError(f"plaintext level {p.level} != ciphertext level {a.level}")
        if p.slot_count != a.slot_count:
            raise AlignmentError("slot count mismatch")
        if not math.isclose(p.scale, a.scale, rel_tol=SCALE_RTOL):
            raise AlignmentError("plaintext scale differs from ciphertext scale")
        self.profiler.charge("add_plain")
        return self._new(self._add_plain(a, p), a.level, a.scale, a.slot_count, a.valid)

    def add_const(self, a: Ciphertext, c) -> Ciphertext:
        """Add a scalar or a logical-width vector of plaintext values."""
        values = self._broadcast(c, a.slot_count)
        return self.add_plain(a, self.encode(values, a.level, a.scale))

    def mult(self, a: Ciphertext, b: Ciphertext, keys: KeySet) -> Ciphertext:
        self._check_pair(a, b)
        self._need_level(a, 1)
        self.profiler.charge("mult_ct")
        self.profiler.charge("relinearize")
        self.profiler.charge("rescale")
        payload, scale = self._mult(a, b, keys)
        return self._new(payload, a.level - 1, scale, a.slot_count, min(a.valid, b.valid))

    def mult_plain(self, a: Ciphertext, p) -> Ciphertext:
        """Multiply by plaintext values (a :class:`Plaintext` or raw vector)."""
        if not isinstance(p, Plaintext):
            p = self.encode(self._broadcast(p, a.slot_count), a.level, a.scale)
        if p.slot_count != a.slot_count:
            raise AlignmentError("slot count mismatch")
        if p.level != a.level:
            raise AlignmentError(f"plaintext level {p.level} != ciphertext level {a.level}")
        self._need_level(a, 1)
        self.profiler.charge("mult_plain")
        self.profiler.charge("rescale")
        payload, scale = self._mult_plain(a, p)
        return self._new(payload, a.level - 1, scale, a.slot_count, a.valid)

    def mult_const(self, a: Ciphertext, c) -> Ciphertext:
        self._need_level(a, 1)
        self.profiler.charge("mult_plain")
        self.profiler.charge("rescale")
        payload, scale = self._mult_const(a, c)
        return self._new(payload, a.level - 1, scale, a.slot_count, a.valid)

    def rotate(self, a: Ciphertext, steps: int, keys: KeySet) -> Ciphertext:
        """Cyclic left shift of the logical vector by ``steps``."""
        w, slots = a.slot_count, self.params.slots
        shift = int(steps) % w
        if shift == 0:
            return a
        exact = slots % w == 0
        plan = self.rotation_plan(shift, keys)
        self.profiler.charge("rotate", len(plan))
        payload = self._rotate_plan(a, plan, shift, keys)
        valid = slots if exact else max(0, a.valid - shift)
        return self._new(payload, a.level, a.scale, w, valid)

    def _rotate_plan(self, a: Ciphertext, plan: list[int], shift: int, keys: KeySet) -> Any:
        out = a
        for step in plan:
            out = Ciphertext(self._rotate(out, step, keys), a.level, a.scale, a.slot_count, a.valid)
        return out.payload

    def rotation_plan(self, shift: int, keys: KeySet) -> list[int]:
        """Elementary key-switching steps realising a physical left shift."""
        slots = self.params.slots
        shift %= slots
        avail = keys.rotation_steps
        if shift in avail:
            return [shift]
        plan = _binary_plan(shift, avail)
        if plan is None and (slots - shift) > 0:
            neg = _binary_plan(slots - shift, {-s for s in avail if s < 0})
            plan = None if neg is None else [-s for s in neg]
        if plan is None:
            raise RotationKeyError(f"no rotation keys compose a shift of {shift}")
        return plan

    def mod_switch(self, a: Ciphertext, level: int) -> Ciphertext:
        if level == a.level:
            return a
        if level > a.level or level < 0:
            raise AlignmentError(f"cannot mod-switch from level {a.level} to {level}")
        payload, scale = self._mod_switch(a, level)
        return self._new(payload, level, scale, a.slot_count, a.valid)

    def align(self, *cts: Ciphertext) -> list[Ciphertext]:
        """Mod-switch every operand down to the lowest level among them."""
        lvl = min(c.level for c in cts)
        return [self.mod_switch(c, lvl) for c in cts]

    # aligned conveniences used by the pipeline code
    def add_any(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        return self.add(*self.align(a, b))

    def sub_any(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        return self.sub(*self.align(a, b))

    def mult_any(self, a: Ciphertext, b: Ciphertext, keys: KeySet) -> Ciphertext:
        return self.mult(*self.align(a, b), keys)

    def sum_any(self, cts: Sequence[Ciphertext]) -> Ciphertext:
        cts = self.align(*cts)
        acc = cts[0]
        for c in cts[1:]:
            acc = self.add(acc, c)
        return acc

    def one_minus(self, a: Ciphertext) -> Ciphertext:
        return self.add_const(self.negate(a), 1)

    # -- polynomial evaluation -------------------------------------------------
    def poly_eval(self, coeffs: Sequence, x: Ciphertext, keys: KeySet,
                  strategy: str = "horner") -> Ciphertext:
        coeffs = list(coeffs)
        if not coeffs:
            raise ParameterError("empty coefficient list")
        k = len(coeffs) - 1
        if strategy == "horner":
            self._need_level(x, k)
            acc = self.const_like(x, coeffs[k])
            for j in range(k - 1, -1, -1):
                acc = self.mult(acc, self.mod_switch(x, acc.level), keys)
                if coeffs[j] != 0:
                    acc = self.add_const(acc, coeffs[j])
            return acc
        if strategy == "paterson-stockmeyer":
            need = poly_depth(k, strategy)
            self._need_level(x, need)
            return _paterson_stockmeyer(self, coeffs, x, keys)
        raise ParameterError(f"unknown evaluation strategy {strategy!r}")

    def aprx_cmp(self, s: Ciphertext, tau, delta, sharpen: int, keys: KeySet,
                 strategy: str = "horner") -> Ciphertext:
        """Soft ``s >= tau``: ``sharpen - 1`` odd steps then the cubic on ``(s - tau) / delta``."""
        if sharpen < 1:
            raise ParameterError("sharpen must be >= 1")
        if not delta > 0:
            raise ParameterError("delta must be positive")
        self._need_level(s, cmp_depth(sharpen, strategy))
        if isinstance(tau, Ciphertext):
            diff = self.sub_any(s, tau)
        else:
            diff = self.add_const(s, -_exact(tau))
        x = self.mult_const(diff, Fraction(1) / _exact(delta))
        for _ in range(sharpen - 1):
            x = self.poly_eval(STEP_COEFFS, x, keys, strategy)
        return self.poly_eval(CMP_COEFFS, x, keys, strategy)

    # -- helpers ---------------------------------------------------------------------
    def _new(self, payload, level, scale, slot_count, valid) -> Ciphertext:
        self.profiler.touch(level)
        return Ciphertext(payload, level, scale, slot_count, valid)

    def _check_pair(self, a: Ciphertext, b: Ciphertext) -> None:
        if a.slot_count != b.slot_count:
            raise AlignmentError(f"slot count mismatch: {a.slot_count} vs {b.slot_count}")
        if a.level != b.level:
            raise AlignmentError(f"level mismatch: {a.level} vs {b.level}")
        if not math.isclose(a.scale, b.scale, rel_tol=SCALE_RTOL):
            raise AlignmentError(f"scale mismatch: {a.scale} vs {b.scale}")

    def _need_level(self, a: Ciphertext, k: int) -> None:
        if a.level < k:
            raise DepthExhaustedError(f"need {k} levels, ciphertext has {a.level}")

    @staticmethod
    def _broadcast(c, width: int) -> np.ndarray:
        if isinstance(c, (Real, Fraction)) and not isinstance(c, np.ndarray):
            return np.full(width, c, dtype=object if isinstance(c, Fraction) else np.float64)
        values = _as_values(c)
        if len(values) != width:
            raise AlignmentError(f"plaintext width {len(values)} != {width}")
        return values

    def profile_scope(self):
        return self.profiler.scope()


def _exact(x):
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


def _binary_plan(shift: int, avail) -> list[int] | None:
    plan = []
    bit = 1
    while shift:
        if shift & 1:
            if bit not in avail:
                return None
            plan.append(bit)
        shift >>= 1
        bit <<= 1
    return plan


def cmp_depth(sharpen: int, strategy: str = "horner") -> int:
    return 1 + sharpen * poly_depth(3, strategy)


def poly_depth(degree: int, strategy: str = "horner") -> int:
    """Levels consumed by :meth:`Backend.poly_eval`."""
    if degree <= 0:
        return 0
    if strategy == "horner":
        return degree
    if strategy == "paterson-stockmeyer":
        return _ps_levels(degree)
    raise ParameterError(f"unknown evaluation strategy {strategy!r}")


def _ps_split(degree: int) -> int:
    r = math.isqrt(degree + 1)
    return max(2, r if r * r == degree + 1 else r + 1)


def _power_depth(i: int) -> int:
    return 0 if i <= 1 else (i - 1).bit_length()


def _ps_levels(degree: int) -> int:
    # mirrors the level bookkeeping of _paterson_stockmeyer
    b = _ps_split(degree)
    t = (degree + b) // b

    def chunk(j):
        terms = [_power_depth(i) + 1 for i in range(1, b) if j * b + i <= degree]
        return max(terms, default=0)

    acc = chunk(t - 1)
    for j in range(t - 2, -1, -1):
        acc = max(max(acc, _power_depth(b)) + 1, chunk(j))
    return acc


def _paterson_stockmeyer(be: Backend, coeffs: list, x: Ciphertext, keys: KeySet) -> Ciphertext:
    k = len(coeffs) - 1
    if k == 0:
        return be.const_like(x, coeffs[0])
    b = _ps_split(k)
    pw = {1: x}
    for i in range(2, b + 1):
        h = i // 2
        pw[i] = be.mult_any(pw[h], pw[i - h], keys)
    t = (k + b) // b

    def chunk(j: int) -> Ciphertext:
        terms = [be.mult_const(pw[i], coeffs[j * b + i]) for i in range(1, b) if j * b + i <= k]
        if terms:
            acc = be.sum_any(terms)
        else:
            acc = be.const_like(x, 0)
        if coeffs[j * b] != 0:
            acc = be.add_const(acc, coeffs[j * b])
        return acc

    acc = chunk(t - 1)
    for j in range(t - 2, -1, -1):
        acc = be.add_any(be.mult_any(acc, pw[b], keys), chunk(j))
    return acc
