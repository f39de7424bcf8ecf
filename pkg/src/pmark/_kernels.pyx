# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Philox4x64-10 kernels.

Bit-compatible with ``pmark._philox_numpy``: block ``i`` of a stream is the
Philox4x64-10 output for counter ``(i, 0, 0, 0)`` (with carry into the next
counter word) under the stream key. Backends produce only integer-exact
outputs (raw words and their uniform mapping); floating-point transforms
live in ``pmark.rng`` so the bit streams cannot diverge across backends.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint64_t

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    #include <stddef.h>

    static inline uint64_t pmark_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) {
        __uint128_t p = (__uint128_t)a * (__uint128_t)b;
        *hi = (uint64_t)(p >> 64);
        return (uint64_t)p;
    }

    static void pmark_fill_raw(uint64_t k0, uint64_t k1, uint64_t b0, uint64_t b1,
                               uint64_t *out, ptrdiff_t nblocks) {
        static const uint64_t M0 = 0xD2E7470EE14C6C93ULL;
        static const uint64_t M1 = 0xCA5A826395121157ULL;
        static const uint64_t W0 = 0x9E3779B97F4A7C15ULL;
        static const uint64_t W1 = 0xBB67AE8584CAA73BULL;
        uint64_t c0 = b0, c1 = b1;
        ptrdiff_t i;
        for (i = 0; i < nblocks; i++) {
            uint64_t x0 = c0, x1 = c1, x2 = 0, x3 = 0, K0 = k0, K1 = k1;
            int r = 0;
            for (;;) {
                uint64_t hi0, hi1;
                uint64_t lo0 = pmark_mulhilo(M0, x0, &hi0);
                uint64_t lo1 = pmark_mulhilo(M1, x2, &hi1);
                uint64_t n0 = hi1 ^ x1 ^ K0;
                uint64_t n2 = hi0 ^ x3 ^ K1;
                x0 = n0; x1 = lo1; x2 = n2; x3 = lo0;
                if (++r == 10) break;
                K0 += W0; K1 += W1;
            }
            out[0] = x0; out[1] = x1; out[2] = x2; out[3] = x3;
            out += 4;
            if (++c0 == 0) ++c1;
        }
    }

    static void pmark_raw_to_uniform(const uint64_t *raw, double *out, ptrdiff_t n) {
        const double scale = 1.0 / 9007199254740992.0; /* 2**-53 */
        ptrdiff_t i;
        for (i = 0; i < n; i++) {
            out[i] = (double)(raw[i] >> 11) * scale;
        }
    }
    """
    uint64_t pmark_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) nogil
    void pmark_fill_raw(uint64_t k0, uint64_t k1, uint64_t b0, uint64_t b1,
                        uint64_t *out, Py_ssize_t nblocks) nogil
    void pmark_raw_to_uniform(const uint64_t *raw, double *out, Py_ssize_t n) nogil

BACKEND_NAME = "compiled"


def philox_raw(key0, key1, start_block, n):
    """Return ``n`` raw uint64 outputs starting at ``start_block``."""
    cdef Py_ssize_t count = n
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    cdef Py_ssize_t nblocks = (count + 3) // 4
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] buf = np.empty(4 * nblocks, dtype=np.uint64)
    cdef uint64_t k0 = key0, k1 = key1
    cdef uint64_t b0 = <uint64_t>(start_block & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t b1 = <uint64_t>((start_block >> 64) & 0xFFFFFFFFFFFFFFFF)
    with nogil:
        pmark_fill_raw(k0, k1, b0, b1, <uint64_t *>buf.data, nblocks)
    return buf[:count]


def philox_uniforms(key0, key1, start_block, n):
    """Uniform doubles in [0, 1) with 53-bit resolution: (raw >> 11) * 2**-53."""
    cdef Py_ssize_t count = n
    if count <= 0:
        return np.empty(0, dtype=np.float64)
    cdef Py_ssize_t nblocks = (count + 3) // 4
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] buf = np.empty(4 * nblocks, dtype=np.uint64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef uint64_t k0 = key0, k1 = key1
    cdef uint64_t b0 = <uint64_t>(start_block & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t b1 = <uint64_t>((start_block >> 64) & 0xFFFFFFFFFFFFFFFF)
    with nogil:
        pmark_fill_raw(k0, k1, b0, b1, <uint64_t *>buf.data, nblocks)
        pmark_raw_to_uniform(<uint64_t *>buf.data, <double *>out.data, count)
    return out
