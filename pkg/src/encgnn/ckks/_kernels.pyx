# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled modular-arithmetic kernels for the RNS ring.

Every array is a C-contiguous ``uint64`` block of shape ``(limbs, N)``; row ``i``
lives modulo ``q[i]``.  Moduli must be below 2**62.
"""
import numpy as np
cimport numpy as cnp

ctypedef unsigned long long u64
cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"

cnp.import_array()

IMPLEMENTATION = "cython"


cdef inline u64 _mulmod(u64 a, u64 b, u64 q) nogil:
    return <u64>((<u128>a * <u128>b) % q)


cdef inline u64 _mulmod_shoup(u64 a, u64 w, u64 wp, u64 q) nogil:
    # wp = floor(w * 2**64 / q)
    cdef u64 hi = <u64>((<u128>a * <u128>wp) >> 64)
    cdef u64 r = a * w - hi * q
    return r - q if r >= q else r


def ntt_forward(u64[:, ::1] a, u64[:, ::1] psi_rev, u64[:, ::1] psi_rev_shoup, u64[::1] q):
    """In-place negacyclic NTT (Cooley-Tukey, bit-reversed output)."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t limb, m, t, i, j
    cdef u64 qi, s, sp, u, v
    cdef u64 *x
    cdef u64 *y
    with nogil:
        for limb in range(k):
            qi = q[limb]
            t = n
            m = 1
            while m < n:
                t = t >> 1
                for i in range(m):
                    x = &a[limb, 2 * i * t]
                    y = x + t
                    s = psi_rev[limb, m + i]
                    sp = psi_rev_shoup[limb, m + i]
                    for j in range(t):
                        u = x[j]
                        v = _mulmod_shoup(y[j], s, sp, qi)
                        x[j] = u + v - qi if u + v >= qi else u + v
                        y[j] = u - v if u >= v else u + qi - v
                m = m << 1


def ntt_inverse(u64[:, ::1] a, u64[:, ::1] psi_inv_rev, u64[:, ::1] psi_inv_rev_shoup,
                u64[::1] n_inv, u64[::1] q):
    """In-place inverse of :func:`ntt_forward` (Gentleman-Sande)."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t limb, m, h, t, i, j
    cdef u64 qi, s, sp, u, v, ni, nip
    cdef u64 *x
    cdef u64 *y
    with nogil:
        for limb in range(k):
            qi = q[limb]
            t = 1
            m = n
            while m > 1:
                h = m >> 1
                for i in range(h):
                    x = &a[limb, 2 * i * t]
                    y = x + t
                    s = psi_inv_rev[limb, h + i]
                    sp = psi_inv_rev_shoup[limb, h + i]
                    for j in range(t):
                        u = x[j]
                        v = y[j]
                        x[j] = u + v - qi if u + v >= qi else u + v
                        y[j] = _mulmod_shoup(u - v if u >= v else u + qi - v, s, sp, qi)
                t = t << 1
                m = h
            ni = n_inv[limb]
            nip = <u64>((<u128>ni << 64) // qi)
            x = &a[limb, 0]
            for j in range(n):
                x[j] = _mulmod_shoup(x[j], ni, nip, qi)


def mulmod(u64[:, ::1] a, u64[:, ::1] b, u64[::1] q):
    """Pointwise ``a * b mod q`` per limb; returns a new array."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], limb, j
    out = np.empty((k, n), dtype=np.uint64)
    cdef u64[:, ::1] o = out
    cdef u64 qi
    with nogil:
        for limb in range(k):
            qi = q[limb]
            for j in range(n):
                o[limb, j] = _mulmod(a[limb, j], b[limb, j], qi)
    return out


def mulmod_scalar(u64[:, ::1] a, u64[::1] c, u64[::1] q):
    """Multiply limb ``i`` by the residue ``c[i]``; returns a new array."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], limb, j
    out = np.empty((k, n), dtype=np.uint64)
    cdef u64[:, ::1] o = out
    cdef u64 qi, ci, cp
    with nogil:
        for limb in range(k):
            qi = q[limb]
            ci = c[limb]
            cp = <u64>((<u128>ci << 64) // qi)
            for j in range(n):
                o[limb, j] = _mulmod_shoup(a[limb, j], ci, cp, qi)
    return out


def muladd(u64[:, ::1] acc, u64[:, ::1] a, u64[:, ::1] b, u64[::1] q):
    """In-place ``acc += a * b mod q``."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], limb, j
    cdef u64 qi, v
    with nogil:
        for limb in range(k):
            qi = q[limb]
            for j in range(n):
                v = acc[limb, j] + _mulmod(a[limb, j], b[limb, j], qi)
                acc[limb, j] = v - qi if v >= qi else v
