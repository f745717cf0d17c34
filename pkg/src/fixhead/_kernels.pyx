# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: butterfly FWHT and fixed-order dense matrix-vector products."""


def fwht_rows(double[:, ::1] x):
    """In-place unnormalized Walsh-Hadamard transform of every row of ``x``."""
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t r, h, i, j
    cdef double a, b
    with nogil:
        for r in range(rows):
            h = 1
            while h < n:
                i = 0
                while i < n:
                    for j in range(i, i + h):
                        a = x[r, j]
                        b = x[r, j + h]
                        x[r, j] = a + b
                        x[r, j + h] = a - b
                    i += 2 * h
                h *= 2


def gemv(double[:, ::1] m, double[::1] x, double[::1] out):
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t cols = m.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in range(rows):
            acc = 0.0
            for j in range(cols):
                acc = acc + m[i, j] * x[j]
            out[i] = acc


def gemv_transposed(double[:, ::1] m, double[::1] g, double[::1] out):
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t cols = m.shape[1]
    cdef Py_ssize_t i, j
    cdef double gi
    with nogil:
        for j in range(cols):
            out[j] = 0.0
        for i in range(rows):
            gi = g[i]
            for j in range(cols):
                out[j] = out[j] + m[i, j] * gi
