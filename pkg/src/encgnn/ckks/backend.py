"""Leveled RNS-CKKS backend.

Ciphertext payloads are pairs ``(c0, c1)`` of ``uint64`` arrays of shape
``(level + 1, N)`` kept in the NTT domain.  Key switching uses one special
prime ``P`` with per-prime digit decomposition.
"""
from __future__ import annotations

import numpy as np

from ..he.api import Backend, Ciphertext, HEParams, KeySet, Plaintext
from ..he.errors import EncodingError, RotationKeyError
from ..he.profile import Profiler
from . import kernels
from .context import Context, get_context

SIGMA = 3.2
_TAG_SECRET, _TAG_PUBLIC, _TAG_RELIN, _TAG_ROT = 1, 2, 3, 4


class SecretKey:
    def __init__(self, coeffs: np.ndarray, ntt: np.ndarray):
        self.coeffs = coeffs  # int8 ternary coefficients
        self.ntt = ntt        # NTT form over the extended basis


class CkksKeys:
    """Key material; switching keys are derived lazily from the seed on first use."""

    def __init__(self, backend: "CkksBackend", seed: int, steps):
        self.backend = backend
        self.seed = seed
        self.steps = frozenset(steps)
        self.secret = backend._gen_secret(seed)
        self.public = backend._gen_public(seed, self.secret)
        self._ksk: dict = {}

    def relin(self) -> np.ndarray:
        if "relin" not in self._ksk:
            s2 = self.backend.ring_mul_ext(self.secret.ntt, self.secret.ntt)
            self._ksk["relin"] = self.backend._gen_ksk(self.seed, (_TAG_RELIN,), s2, self.secret)
        return self._ksk["relin"]

    def rotation(self, step: int) -> np.ndarray:
        if step not in self.steps:
            raise RotationKeyError(f"no rotation key for step {step}")
        norm = step % self.backend.params.slots
        if norm not in self._ksk:
            be = self.backend
            coeffs = be.automorphism_coeffs(self.secret.coeffs.astype(np.int64), norm)
            target = be.to_ntt_ext(coeffs)
            self._ksk[norm] = be._gen_ksk(self.seed, (_TAG_ROT, norm), target, self.secret)
        return self._ksk[norm]

    def materialize(self) -> None:
        self.relin()
        for s in sorted(self.steps):
            self.rotation(s)


class CkksBackend(Backend):
    name = "ckks"

    def __init__(self, params: HEParams, seed: int = 0, profiler: Profiler | None = None):
        super().__init__(params, seed, profiler)
        self.ctx: Context = get_context(params)
        self.rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xE9C]))

    # -- helpers over the extended basis -------------------------------------------
    def _q(self, rows: slice) -> np.ndarray:
        return self.ctx.ext[rows]

    def _ntt(self, a: np.ndarray, rows: slice) -> np.ndarray:
        a = np.ascontiguousarray(a, dtype=np.uint64)
        kernels.impl.ntt_forward(a, self.ctx.psi_rev[rows], self.ctx.psi_rev_shoup[rows], self._q(rows))
        return a

    def _intt(self, a: np.ndarray, rows: slice) -> np.ndarray:
        a = np.array(a, dtype=np.uint64, order="C", copy=True)
        kernels.impl.ntt_inverse(a, self.ctx.psi_inv_rev[rows], self.ctx.psi_inv_rev_shoup[rows],
                                 self.ctx.n_inv[rows], self._q(rows))
        return a

    def _reduce(self, coeffs: np.ndarray, rows: slice) -> np.ndarray:
        """Residues of signed integer coefficients (int64 or object) on ``rows``."""
        q = self._q(rows)
        if coeffs.dtype == object:
            return np.array([[int(c) % int(qi) for c in coeffs] for qi in q], dtype=np.uint64)
        return np.mod(coeffs[None, :], q.astype(np.int64)[:, None]).astype(np.uint64)

    def to_ntt_ext(self, coeffs: np.ndarray) -> np.ndarray:
        rows = self.ctx.ext_rows(self.params.levels)
        return self._ntt(self._reduce(coeffs, rows), rows)

    def ring_mul_ext(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return kernels.impl.mulmod(a, b, self.ctx.ext)

    @staticmethod
    def _addq(a, b, q):
        s = a + b
        return np.where(s >= q[:, None], s - q[:, None], s)

    @staticmethod
    def _subq(a, b, q):
        return np.where(a >= b, a - b, a + q[:, None] - b)

    def _ternary(self, rng) -> np.ndarray:
        return rng.integers(-1, 2, size=self.ctx.n).astype(np.int64)

    def _gauss(self, rng) -> np.ndarray:
        e = np.rint(rng.normal(0.0, SIGMA, size=self.ctx.n))
        return np.clip(e, -6 * SIGMA, 6 * SIGMA).astype(np.int64)

    def _uniform(self, rng, rows: slice) -> np.ndarray:
        q = self._q(rows)
        return np.stack([rng.integers(0, int(qi), size=self.ctx.n, dtype=np.uint64) for qi in q])

    # -- key generation ------------------------------------------------------------------
    def _gen_secret(self, seed: int) -> SecretKey:
        rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_SECRET]))
        s = self._ternary(rng)
        return SecretKey(s.astype(np.int8), self.to_ntt_ext(s))

    def _gen_public(self, seed: int, sk: SecretKey) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_PUBLIC]))
        rows = self.ctx.ct_rows(self.params.levels)
        q = self._q(rows)
        a = self._uniform(rng, rows)
        e = self._ntt(self._reduce(self._gauss(rng), rows), rows)
        b = self._subq(e, kernels.impl.mulmod(a, np.ascontiguousarray(sk.ntt[rows]), q), q)
        return b, a

    def _gen_ksk(self, seed: int, tag: tuple, target: np.ndarray, sk: SecretKey) -> np.ndarray:
        """Switching key from ``target`` (NTT, extended basis) to ``sk``.

        Returns shape ``(L+1, 2, L+2, N)``: for digit ``j`` the pair
        ``(-a*s + e + P*target*[row == q_j], a)``.
        """
        rng = np.random.default_rng(np.random.SeedSequence([seed, *tag]))
        levels = self.params.levels
        rows = self.ctx.ext_rows(levels)
        q = self._q(rows)
        out = np.empty((levels + 1, 2, levels + 2, self.ctx.n), dtype=np.uint64)
        for j in range(levels + 1):
            a = self._uniform(rng, rows)
            e = self._ntt(self._reduce(self._gauss(rng), rows), rows)
            b = self._subq(e, kernels.impl.mulmod(a, sk.ntt, q), q)
            r = j + 1
            pt = kernels.impl.mulmod_scalar(np.ascontiguousarray(target[r : r + 1]),
                                            self.ctx.p_mod[j : j + 1], q[r : r + 1])
            b[r] = self._addq(b[r : r + 1], pt, q[r : r + 1])[0]
            out[j, 0] = b
            out[j, 1] = a
        return out

    def _keygen(self, steps):
        return CkksKeys(self, self.seed, steps)

    # -- encoding --------------------------------------------------------------------------
    def level_scale(self, level: int) -> float:
        return self.ctx.scales[level]

    def encode_coeffs(self, values: np.ndarray, scale: float) -> np.ndarray:
        """Integer coefficient vector (int64) encoding ``values`` tiled over all slots."""
        ctx = self.ctx
        n, slots = ctx.n, ctx.n // 2
        vals = np.asarray([float(v) for v in values], dtype=np.float64)
        z = np.resize(vals, slots)
        ev = np.zeros(n, dtype=np.complex128)
        ev[ctx.slot_index] = z
        ev[ctx.conj_index] = np.conj(z)
        m = (np.fft.fft(ev) / n * np.conj(ctx.twist)).real * scale
        limit = ctx.q[0] / 2
        if not np.all(np.abs(m) < min(limit, 2.0**62)):
            raise EncodingError("encoded value exceeds the modulus budget")
        return np.rint(m).astype(np.int64)

    def decode_coeffs(self, m: np.ndarray, scale: float, width: int) -> np.ndarray:
        ctx = self.ctx
        ev = ctx.n * np.fft.ifft(m.astype(np.float64) * ctx.twist)
        return ev[ctx.slot_index[:width]].real / scale

    def _encode(self, values, level, scale):
        rows = self.ctx.ct_rows(level)
        return self._ntt(self._reduce(self.encode_coeffs(values, scale), rows), rows)

    def _trivial(self, values, level, scale):
        c0 = self._encode(values, level, scale)
        return c0, np.zeros_like(c0)

    def decode_plain(self, p: Plaintext) -> np.ndarray:
        m = self._centered_limb0(p.payload)
        return self.decode_coeffs(m, p.scale, p.slot_count)

    # -- encryption --------------------------------------------------------------------
    def _encrypt(self, values, level, keys: KeySet):
        mat: CkksKeys = keys.material
        rows = self.ctx.ct_rows(level)
        q = self._q(rows)
        scale = self.level_scale(level)
        m = self._encode(values, level, scale)
        u = self._ntt(self._reduce(self._ternary(self.rng), rows), rows)
        e0 = self._ntt(self._reduce(self._gauss(self.rng), rows), rows)
        e1 = self._ntt(self._reduce(self._gauss(self.rng), rows), rows)
        b, a = mat.public
        k = level + 1
        c0 = self._addq(self._addq(kernels.impl.mulmod(np.ascontiguousarray(b[:k]), u, q), e0, q), m, q)
        c1 = self._addq(kernels.impl.mulmod(np.ascontiguousarray(a[:k]), u, q), e1, q)
        return (c0, c1), scale

    def _centered_limb0(self, ntt_poly: np.ndarray) -> np.ndarray:
        rows = slice(1, 2)
        coeffs = self._intt(ntt_poly[:1], rows)[0].astype(np.int64)
        q0 = self.ctx.q[0]
        return np.where(coeffs > q0 // 2, coeffs - q0, coeffs)

    def _decrypt(self, ct: Ciphertext, keys: KeySet):
        mat: CkksKeys = keys.material
        c0, c1 = ct.payload
        q = self._q(slice(1, 2))
        s = np.ascontiguousarray(mat.secret.ntt[1:2])
        m_ntt = self._addq(c0[:1], kernels.impl.mulmod(np.ascontiguousarray(c1[:1]), s, q), q)
        m = self._centered_limb0(m_ntt)
        if np.max(np.abs(m)) > self.ctx.q[0] // 4 or (ct.level >= 1 and not self._limb1_agrees(ct, mat, m)):
            raise EncodingError("decryption overflow: plaintext exceeds the base modulus")
        return self.decode_coeffs(m, ct.scale, ct.slot_count)

    def _limb1_agrees(self, ct: Ciphertext, mat: "CkksKeys", m: np.ndarray) -> bool:
        # a value that wrapped around q0 leaves limb 1 inconsistent with the limb-0 lift
        c0, c1 = ct.payload
        rows = slice(2, 3)
        q = self._q(rows)
        s = np.ascontiguousarray(mat.secret.ntt[2:3])
        m1 = self._intt(self._addq(c0[1:2], kernels.impl.mulmod(np.ascontiguousarray(c1[1:2]), s, q), q), rows)[0]
        q1 = int(q[0])
        return bool(np.all(np.mod(m, q1).astype(np.uint64) == m1))

    # -- arithmetic --------------------------------------------------------------------
    def _add(self, a, b, negate_b):
        q = self._q(self.ctx.ct_rows(a.level))
        op = self._subq if negate_b else self._addq
        return op(a.payload[0], b.payload[0], q), op(a.payload[1], b.payload[1], q)

    def _add_plain(self, a, p):
        q = self._q(self.ctx.ct_rows(a.level))
        return self._addq(a.payload[0], p.payload, q), a.payload[1]

    def _negate(self, a):
        q = self._q(self.ctx.ct_rows(a.level))[:, None]
        return tuple(np.where(c == 0, c, q - c) for c in a.payload)

    def _mult(self, a, b, keys):
        lvl = a.level
        q = self._q(self.ctx.ct_rows(lvl))
        mm = kernels.impl.mulmod
        a0, a1 = a.payload
        b0, b1 = b.payload
        d0 = mm(a0, b0, q)
        d1 = self._addq(mm(a0, b1, q), mm(a1, b0, q), q)
        d2 = mm(a1, b1, q)
        k0, k1 = self.key_switch(d2, lvl, keys.material.relin())
        c = (self._addq(d0, k0, q), self._addq(d1, k1, q))
        return self.rescale(c, lvl), a.scale * b.scale / self.ctx.q[lvl]

    def _mult_plain(self, a, p):
        lvl = a.level
        q = self._q(self.ctx.ct_rows(lvl))
        c = tuple(kernels.impl.mulmod(x, p.payload, q) for x in a.payload)
        return self.rescale(c, lvl), a.scale * p.scale / self.ctx.q[lvl]

    def _scalar_mult_rescale(self, c, lvl: int, value: float, factor: float):
        k = int(round(float(value) * factor))
        q = self._q(self.ctx.ct_rows(lvl))
        res = np.array([k % int(qi) for qi in q], dtype=np.uint64)
        c = tuple(kernels.impl.mulmod_scalar(x, res, q) for x in c)
        return self.rescale(c, lvl)

    def _mult_const(self, a, c):
        lvl = a.level
        factor = self.level_scale(lvl - 1) * self.ctx.q[lvl] / a.scale
        return self._scalar_mult_rescale(a.payload, lvl, c, factor), self.level_scale(lvl - 1)

    def _mod_switch(self, a, level):
        k = level + 2
        c = tuple(np.ascontiguousarray(x[:k]) for x in a.payload)
        factor = self.level_scale(level) * self.ctx.q[level + 1] / a.scale
        return self._scalar_mult_rescale(c, level + 1, 1.0, factor), self.level_scale(level)

    def rescale(self, c, lvl: int):
        """Divide by ``q_lvl`` and drop the top limb."""
        ctx = self.ctx
        ql = ctx.q[lvl]
        top = tuple(self._intt(x[lvl : lvl + 1], slice(lvl + 1, lvl + 2))[0].astype(np.int64) for x in c)
        rows = ctx.ct_rows(lvl - 1)
        q = self._q(rows)
        inv = ctx.rescale_inv[lvl]
        out = []
        for x, t in zip(c, top):
            r = np.where(t > ql // 2, t - ql, t)
            r_ntt = self._ntt(self._reduce(r, rows), rows)
            out.append(kernels.impl.mulmod_scalar(self._subq(x[:lvl], r_ntt, q), inv, q))
        return tuple(out)

    def key_switch(self, d: np.ndarray, lvl: int, ksk: np.ndarray):
        """Return ``(k0, k1)`` with ``k0 + k1*s ~= d * s'`` where ``ksk`` switches ``s'`` to ``s``."""
        ctx = self.ctx
        ext = ctx.ext_rows(lvl)
        q_ext = self._q(ext)
        coeffs = self._intt(d, ctx.ct_rows(lvl))
        acc0 = np.zeros((lvl + 2, ctx.n), dtype=np.uint64)
        acc1 = np.zeros_like(acc0)
        for j in range(lvl + 1):
            lifted = self._ntt(coeffs[j][None, :] % q_ext[:, None], ext)
            kernels.impl.muladd(acc0, lifted, np.ascontiguousarray(ksk[j, 0, : lvl + 2]), q_ext)
            kernels.impl.muladd(acc1, lifted, np.ascontiguousarray(ksk[j, 1, : lvl + 2]), q_ext)
        return self._mod_down(acc0, lvl), self._mod_down(acc1, lvl)

    def _mod_down(self, acc: np.ndarray, lvl: int) -> np.ndarray:
        ctx = self.ctx
        p = ctx.special
        t = self._intt(acc[:1], slice(0, 1))[0].astype(np.int64)
        r = np.where(t > p // 2, t - p, t)
        rows = ctx.ct_rows(lvl)
        q = self._q(rows)
        r_ntt = self._ntt(self._reduce(r, rows), rows)
        return kernels.impl.mulmod_scalar(self._subq(acc[1:], r_ntt, q), ctx.p_inv[: lvl + 1], q)

    def automorphism_coeffs(self, coeffs: np.ndarray, step: int) -> np.ndarray:
        dest, neg = self.ctx.galois(step)
        out = np.empty_like(coeffs)
        out[dest] = np.where(neg, -coeffs, coeffs)
        return out

    def _automorphism_rns(self, x: np.ndarray, lvl: int, step: int) -> np.ndarray:
        rows = self.ctx.ct_rows(lvl)
        q = self._q(rows)[:, None]
        coeffs = self._intt(x, rows)
        dest, neg = self.ctx.galois(step)
        out = np.empty_like(coeffs)
        out[:, dest] = np.where(neg & (coeffs != 0), q - coeffs, coeffs)
        return self._ntt(out, rows)

    def _rotate(self, a, step, keys):
        ksk = keys.material.rotation(step)
        lvl = a.level
        q = self._q(self.ctx.ct_rows(lvl))
        c0 = self._automorphism_rns(a.payload[0], lvl, step)
        c1 = self._automorphism_rns(a.payload[1], lvl, step)
        k0, k1 = self.key_switch(c1, lvl, ksk)
        return self._addq(c0, k0, q), k1
