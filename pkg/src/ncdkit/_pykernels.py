"""Numpy implementations of the hot numeric kernels.

This is the fallback backend; `ncdkit._ckernels` provides the same five
functions compiled with Cython. Both operate on float64 arrays and must
stay numerically interchangeable (see tests/test_kernels.py).
"""

import numpy as np

NAME = "python"


def matmul(a, b):
    return np.dot(a, b)


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x, g):
    return np.where(x > 0.0, g, 0.0)


def softmax_rows(x, temperature):
    """Row-wise stable softmax of x / temperature."""
    z = x / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_grad(p, gp, temperature):
    """Backward of softmax_rows: gx = p * (gp - sum(gp * p)) / T, row-wise."""
    dot = (gp * p).sum(axis=1, keepdims=True)
    return p * (gp - dot) / temperature
