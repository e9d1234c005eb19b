"""Vectorized numpy versions of the modular kernels in ``_kernels.pyx``.

Products of two residues below 2**62 overflow ``uint64``, so the quotient is
estimated in extended precision and the remainder fixed up with wrapping
integer arithmetic.  That needs a 64-bit ``longdouble`` mantissa (x86 Linux);
elsewhere the kernels drop to Python integers.
"""
from __future__ import annotations

import numpy as np

IMPLEMENTATION = "numpy"

_HAS_EXTENDED = np.finfo(np.longdouble).nmant >= 63


def _mulmod_ld(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> np.ndarray:
    quot = np.floor(
        a.astype(np.longdouble) * b.astype(np.longdouble) / q.astype(np.longdouble)
    ).astype(np.uint64)
    r = (a * b - quot * q).view(np.int64)
    qs = q.astype(np.int64)
    r = np.where(r < 0, r + qs, r)
    r = np.where(r < 0, r + qs, r)
    r = np.where(r >= qs, r - qs, r)
    r = np.where(r >= qs, r - qs, r)
    return r.view(np.uint64)


def _mulmod_obj(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> np.ndarray:
    a, b, q = np.broadcast_arrays(a.astype(object), b.astype(object), q.astype(object))
    return ((a * b) % q).astype(np.uint64)


_mm = _mulmod_ld if _HAS_EXTENDED else _mulmod_obj


def _addmod(a, b, q):
    s = a + b
    return np.where(s >= q, s - q, s)


def _submod(a, b, q):
    return np.where(a >= b, a - b, a + q - b)


def ntt_forward(a: np.ndarray, psi_rev: np.ndarray, psi_rev_shoup: np.ndarray, q: np.ndarray) -> None:
    k, n = a.shape
    qc = q.reshape(k, 1, 1)
    t, m = n, 1
    while m < n:
        t >>= 1
        blk = a.reshape(k, m, 2, t)
        s = psi_rev[:, m : 2 * m].reshape(k, m, 1)
        u = blk[:, :, 0, :].copy()
        v = _mm(blk[:, :, 1, :], s, qc)
        blk[:, :, 0, :] = _addmod(u, v, qc)
        blk[:, :, 1, :] = _submod(u, v, qc)
        m <<= 1


def ntt_inverse(a: np.ndarray, psi_inv_rev: np.ndarray, psi_inv_rev_shoup: np.ndarray,
                n_inv: np.ndarray, q: np.ndarray) -> None:
    k, n = a.shape
    qc = q.reshape(k, 1, 1)
    t, m = 1, n
    while m > 1:
        h = m >> 1
        blk = a.reshape(k, h, 2, t)
        s = psi_inv_rev[:, h:m].reshape(k, h, 1)
        u = blk[:, :, 0, :].copy()
        v = blk[:, :, 1, :].copy()
        blk[:, :, 0, :] = _addmod(u, v, qc)
        blk[:, :, 1, :] = _mm(_submod(u, v, qc), s, qc)
        t <<= 1
        m = h
    a[:] = _mm(a, n_inv.reshape(k, 1), q.reshape(k, 1))


def mulmod(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> np.ndarray:
    return _mm(a, b, q.reshape(-1, 1))


def mulmod_scalar(a: np.ndarray, c: np.ndarray, q: np.ndarray) -> np.ndarray:
    return _mm(a, c.reshape(-1, 1), q.reshape(-1, 1))


def muladd(acc: np.ndarray, a: np.ndarray, b: np.ndarray, q: np.ndarray) -> None:
    acc[:] = _addmod(acc, mulmod(a, b, q), q.reshape(-1, 1))
