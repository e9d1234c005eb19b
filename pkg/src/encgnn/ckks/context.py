"""Modulus chain, NTT tables and the per-level scale ladder.

Rows of every table follow the *extended basis* ``[P, q_0, q_1, ..., q_L]``:
the special prime first, then the base prime, then one prime per level.  A
ciphertext at level ``l`` uses rows ``1..l+1`` and key-switching uses rows
``0..l+1``; both are contiguous row slices.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from sympy import isprime

from ..he.api import HEParams
from ..he.errors import ParameterError


def _bitrev(n_bits: int, size: int) -> np.ndarray:
    idx = np.arange(size)
    out = np.zeros(size, dtype=np.int64)
    for b in range(n_bits):
        out |= ((idx >> b) & 1) << (n_bits - 1 - b)
    return out


def primes_below(bits: int, two_n: int, taken: set[int]):
    """NTT-friendly primes below ``2**bits`` in decreasing order."""
    q = ((2**bits - 1) // two_n) * two_n + 1
    while q > two_n:
        if q not in taken and isprime(q):
            yield q
        q -= two_n


def prime_near(target: float, two_n: int, taken: set[int]) -> int:
    """NTT-friendly prime closest to ``target``."""
    k0 = round((target - 1) / two_n)
    for off in range(0, 1 << 30):
        for k in (k0 + off, k0 - off) if off else (k0,):
            q = k * two_n + 1
            if k > 0 and q < 2**61 and q not in taken and isprime(q):
                return q
    raise ParameterError("no NTT-friendly prime found")  # pragma: no cover


def primitive_root_2n(q: int, two_n: int) -> int:
    exp = (q - 1) // two_n
    for x in range(2, q):
        psi = pow(x, exp, q)
        if pow(psi, two_n // 2, q) == q - 1:
            return psi
    raise ParameterError(f"no primitive {two_n}-th root mod {q}")  # pragma: no cover


class Context:
    def __init__(self, params: HEParams):
        self.params = params
        n = params.ring_degree
        self.n = n
        two_n = 2 * n
        bits = params.prime_bits
        levels = params.levels
        taken: set[int] = set()

        special = next(primes_below(bits[-1], two_n, taken))
        taken.add(special)
        q0 = next(primes_below(bits[0], two_n, taken))
        taken.add(q0)
        chain = [q0]
        scales = [0.0] * (levels + 1)
        delta = float(2**params.scale_bits)
        scales[levels] = delta
        # choose the level primes top-down so every level keeps a scale near 2**scale_bits
        level_primes = [0] * (levels + 1)
        for lvl in range(levels, 0, -1):
            if bits[lvl] == params.scale_bits:
                q = prime_near(delta * delta / 2.0**params.scale_bits, two_n, taken)
            else:
                q = next(primes_below(bits[lvl], two_n, taken))
            taken.add(q)
            level_primes[lvl] = q
            delta = delta * delta / q
            scales[lvl - 1] = delta
        chain += level_primes[1:]
        if special < max(chain):
            raise ParameterError("special prime must exceed every data prime")

        self.q = chain                      # q_0..q_L
        self.special = special
        self.scales = scales
        self.ext = np.array([special] + chain, dtype=np.uint64)

        rev = _bitrev(n.bit_length() - 1, n)
        k = len(self.ext)
        self.psi_rev = np.empty((k, n), dtype=np.uint64)
        self.psi_inv_rev = np.empty((k, n), dtype=np.uint64)
        self.n_inv = np.empty(k, dtype=np.uint64)
        for row, qi in enumerate(int(x) for x in self.ext):
            psi = primitive_root_2n(qi, two_n)
            psi_inv = pow(psi, -1, qi)
            pw = _powers(psi, n, qi)
            pw_inv = _powers(psi_inv, n, qi)
            self.psi_rev[row] = pw[rev]
            self.psi_inv_rev[row] = pw_inv[rev]
            self.n_inv[row] = pow(n, -1, qi)

        # Shoup companions floor(w * 2**64 / q) for the compiled butterflies
        self.psi_rev_shoup = _shoup(self.psi_rev, self.ext)
        self.psi_inv_rev_shoup = _shoup(self.psi_inv_rev, self.ext)

        # q_l^{-1} mod q_i for rescaling, and P^{-1} mod q_i for key switching
        self.rescale_inv = [
            np.array([pow(self.q[lvl], -1, self.q[i]) for i in range(lvl)], dtype=np.uint64)
            for lvl in range(levels + 1)
        ]
        self.p_inv = np.array([pow(special, -1, qi) for qi in self.q], dtype=np.uint64)
        self.p_mod = np.array([special % qi for qi in self.q], dtype=np.uint64)
        self._galois: dict[int, tuple[np.ndarray, np.ndarray]] = {}

        # slot j sits at the root zeta^(5^j mod 2N)
        slots = n // 2
        g = np.empty(slots, dtype=np.int64)
        acc = 1
        for j in range(slots):
            g[j] = acc
            acc = acc * 5 % two_n
        self.slot_index = (g - 1) // 2
        self.conj_index = (two_n - g - 1) // 2
        self.twist = np.exp(1j * np.pi * np.arange(n) / n)

    # row slices -----------------------------------------------------------------
    def ct_rows(self, level: int) -> slice:
        return slice(1, level + 2)

    def ext_rows(self, level: int) -> slice:
        return slice(0, level + 2)

    def galois(self, step: int) -> tuple[np.ndarray, np.ndarray]:
        """Destination index and sign mask of ``X -> X^(5^step)``."""
        step %= self.n // 2
        if step not in self._galois:
            g = pow(5, step, 2 * self.n)
            idx = (np.arange(self.n, dtype=np.int64) * g) % (2 * self.n)
            self._galois[step] = (idx % self.n, idx >= self.n)
        return self._galois[step]


def _shoup(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.empty_like(w)
    for row, qi in enumerate(int(x) for x in q):
        out[row] = [(int(x) << 64) // qi for x in w[row]]
    return out


def _powers(base: int, n: int, q: int) -> np.ndarray:
    out = np.empty(n, dtype=np.uint64)
    acc = 1
    for i in range(n):
        out[i] = acc
        acc = acc * base % q
    return out


@lru_cache(maxsize=16)
def get_context(params: HEParams) -> Context:
    return Context(params)
