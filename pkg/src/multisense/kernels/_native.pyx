# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: per-sample trigger scan and damped-sinusoid bank.

Must agree result-for-result with multisense.kernels._pure.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, sin

cnp.import_array()

DEF TWO_PI = 6.283185307179586476925286766559


def trigger_scan(forces, targets, double window, int debounce):
    cdef double[::1] f = np.ascontiguousarray(forces, dtype=np.float64)
    cdef double[::1] t = np.ascontiguousarray(targets, dtype=np.float64)
    if debounce < 1:
        raise ValueError("debounce must be >= 1")

    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t m = t.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_idx = np.empty(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_target = np.empty(m, dtype=np.int64)

    cdef Py_ssize_t i, j, hit
    cdef Py_ssize_t next_target = 0
    cdef Py_ssize_t active = -1
    cdef int run = 0
    cdef Py_ssize_t fired = 0
    cdef double force

    for i in range(n):
        if next_target >= m:
            break
        force = f[i]
        hit = -1
        for j in range(next_target, m):
            if fabs(force - t[j]) <= window:
                hit = j
                break
        if hit < 0:
            active = -1
            run = 0
            continue
        if hit == active:
            run += 1
        else:
            active = hit
            run = 1
        if run >= debounce:
            out_idx[fired] = i
            out_target[fired] = hit
            fired += 1
            next_target = hit + 1
            active = -1
            run = 0
    return out_idx[:fired].copy(), out_target[:fired].copy()


def modal_synth(freqs, dampings, amps, Py_ssize_t n_samples, double dt):
    cdef double[::1] f = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef double[::1] d = np.ascontiguousarray(dampings, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(amps, dtype=np.float64)
    cdef Py_ssize_t m = f.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(n_samples, dtype=np.float64)
    cdef double[::1] out = out_arr

    cdef Py_ssize_t k, i
    cdef double t_i, fk, dk, ak
    for k in range(m):
        fk = TWO_PI * f[k]
        dk = d[k]
        ak = a[k]
        for i in range(n_samples):
            t_i = i * dt
            out[i] += ak * exp(-dk * t_i) * sin(fk * t_i)
    return out_arr
