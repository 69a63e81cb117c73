# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def duhamel_accumulate(F, omega, double dt):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] Fa = np.ascontiguousarray(F, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef Py_ssize_t nt = Fa.shape[0], P = Fa.shape[1], i, p
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] out = np.empty((nt, P), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] er = np.empty(P), ei = np.empty(P)
    cdef double half = 0.5 * dt, sr, si, ar, ai
    for p in range(P):
        er[p] = cos(dt * om[p])
        ei[p] = -sin(dt * om[p])
        out[0, p] = 0.0
    for i in range(1, nt):
        for p in range(P):
            ar = out[i - 1, p].real + half * Fa[i - 1, p].real
            ai = out[i - 1, p].imag + half * Fa[i - 1, p].imag
            sr = er[p] * ar - ei[p] * ai + half * Fa[i, p].real
            si = er[p] * ai + ei[p] * ar + half * Fa[i, p].imag
            out[i, p].real = sr
            out[i, p].imag = si
    return out


def weighted_sqnorm(c, w2):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] ca = np.ascontiguousarray(c, dtype=np.complex128).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.ascontiguousarray(w2, dtype=np.float64).ravel()
    cdef Py_ssize_t i, P = ca.shape[0]
    cdef double acc = 0.0
    if wa.shape[0] != P:
        raise ValueError("weight and coefficient sizes differ")
    for i in range(P):
        acc += wa[i] * (ca[i].real * ca[i].real + ca[i].imag * ca[i].imag)
    return acc
