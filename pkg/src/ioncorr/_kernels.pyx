# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np

from libc.math cimport cos, sin


def eq2_moments(phases, active, double s):
    cdef const double[:, ::1] ph = np.ascontiguousarray(phases, dtype=np.float64)
    cdef const unsigned char[:, ::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t R = ph.shape[0], N = ph.shape[1], r, j
    g2_arr = np.zeros(R)
    i_arr = np.zeros(R)
    n_arr = np.zeros(R, dtype=np.int64)
    cdef double[::1] g2 = g2_arr
    cdef double[::1] inten = i_arr
    cdef long long[::1] nact = n_arr
    cdef double a2 = 0.5 * s / ((1.0 + s) * (1.0 + s))
    cdef double se_unit = s * s / (2.0 * (1.0 + s) * (1.0 + s))
    cdef double s3 = s * s * s / ((1.0 + s) * (1.0 + s) * (1.0 + s) * (1.0 + s))
    cdef double er, ei, pr, pi, c, sn, i_se, i_coh, dre, dim, nf
    cdef long long n
    with nogil:
        for r in range(R):
            er = 0.0
            ei = 0.0
            pr = 0.0
            pi = 0.0
            n = 0
            for j in range(N):
                if act[r, j]:
                    c = cos(ph[r, j])
                    sn = sin(ph[r, j])
                    er = er + c
                    ei = ei - sn
                    pr = pr + (c * c - sn * sn)
                    pi = pi - 2.0 * c * sn
                    n = n + 1
            nact[r] = n
            if n == 0:
                continue
            nf = <double>n
            i_se = nf * se_unit
            i_coh = a2 * (er * er + ei * ei)
            dre = a2 * (er * er - ei * ei - pr)
            dim = a2 * (2.0 * er * ei - pi)
            g2[r] = ((2.0 - 2.0 / nf) * i_se * i_se + nf * s3
                     + 4.0 * (1.0 - 2.0 / nf) * i_se * i_coh + dre * dre + dim * dim)
            inten[r] = i_se + i_coh
    return g2_arr, i_arr, n_arr


def subset_product(factors):
    cdef const double complex[:, :, ::1] f = np.ascontiguousarray(factors, dtype=np.complex128)
    cdef Py_ssize_t N = f.shape[0], T = f.shape[1], x, t, m1, m2
    out_arr = np.zeros((T, 16), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex tmp[16]
    cdef double complex lhs
    with nogil:
        for t in range(T):
            out[t, 0] = 1.0
            for x in range(N):
                for m1 in range(16):
                    tmp[m1] = 0.0
                for m1 in range(16):
                    lhs = out[t, m1]
                    if lhs == 0.0:
                        continue
                    for m2 in range(16):
                        if m1 & m2 == 0:
                            tmp[m1 | m2] = tmp[m1 | m2] + lhs * f[x, t, m2]
                for m1 in range(16):
                    out[t, m1] = tmp[m1]
    return out_arr
