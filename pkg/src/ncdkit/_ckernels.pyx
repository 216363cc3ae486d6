# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot numeric kernels.

Same contract as ncdkit._pykernels; plain C loops beat BLAS dispatch
overhead at the small matrix sizes this package runs at.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fmax

cnp.import_array()

NAME = "compiled"


def matmul(double[:, :] a, double[:, :] b):
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t k = a.shape[1]
    cdef Py_ssize_t n = b.shape[1]
    if b.shape[0] != k:
        raise ValueError(f"matmul shape mismatch: {a.shape[1]} vs {b.shape[0]}")
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, :] c = out
    cdef Py_ssize_t i, j, p
    cdef double aip
    for i in range(m):
        for p in range(k):
            aip = a[i, p]
            if aip == 0.0:
                continue
            for j in range(n):
                c[i, j] += aip * b[p, j]
    return out


def relu(double[:, :] x):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, :] y = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            y[i, j] = fmax(x[i, j], 0.0)
    return out


def relu_grad(double[:, :] x, double[:, :] g):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, :] y = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            y[i, j] = g[i, j] if x[i, j] > 0.0 else 0.0
    return out


def softmax_rows(double[:, :] x, double temperature):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, :] p = out
    cdef Py_ssize_t i, j
    cdef double hi, s, v
    for i in range(m):
        hi = x[i, 0] / temperature
        for j in range(1, n):
            v = x[i, j] / temperature
            if v > hi:
                hi = v
        s = 0.0
        for j in range(n):
            v = exp(x[i, j] / temperature - hi)
            p[i, j] = v
            s += v
        for j in range(n):
            p[i, j] /= s
    return out


def softmax_rows_grad(double[:, :] p, double[:, :] gp, double temperature):
    cdef Py_ssize_t m = p.shape[0]
    cdef Py_ssize_t n = p.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, :] gx = out
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(m):
        dot = 0.0
        for j in range(n):
            dot += gp[i, j] * p[i, j]
        for j in range(n):
            gx[i, j] = p[i, j] * (gp[i, j] - dot) / temperature
    return out
