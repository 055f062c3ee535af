# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Mirrors ``_pykernels`` function for function."""

import numpy as np

cimport cython


def conv2d_strided(const double[:, ::1] x, const double[:, ::1] kernel, Py_ssize_t stride):
    cdef Py_ssize_t kh = kernel.shape[0], kw = kernel.shape[1]
    cdef Py_ssize_t oh = (x.shape[0] - kh) // stride + 1
    cdef Py_ssize_t ow = (x.shape[1] - kw) // stride + 1
    out = np.empty((oh, ow), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, a, b, r0, c0
    cdef double acc
    with nogil:
        for i in range(oh):
            r0 = i * stride
            for j in range(ow):
                c0 = j * stride
                acc = 0.0
                for a in range(kh):
                    for b in range(kw):
                        acc = acc + x[r0 + a, c0 + b] * kernel[a, b]
                o[i, j] = acc
    return out


def backward_energy(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc = 0.0
    with nogil:
        for t in range(n - 1, -1, -1):
            acc = acc + x[t] * x[t]
            o[t] = acc
    return out


def row_sq_error(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1], r, c
    out = np.empty(rows, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, d
    with nogil:
        for r in range(rows):
            acc = 0.0
            for c in range(cols):
                d = a[r, c] - b[r, c]
                acc = acc + d * d
            o[r] = acc
    return out
