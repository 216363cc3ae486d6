"""Minimal reverse-mode automatic differentiation over numpy arrays.

Graphs are built eagerly by the op functions below; `backward` runs the
reverse sweep from a scalar node. Hot primitives (matmul, relu, row
softmax) dispatch through ncdkit.backend; everything else is plain
numpy. float64 throughout so finite-difference checks are meaningful.
"""

import numpy as np

from ncdkit import backend
from ncdkit.core import EPS


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad=False, parents=(), bwd=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._bwd = bwd

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def param(data):
    """A trainable leaf."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def constant(data):
    return Tensor(data)


def wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum g down to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _node(data, parents, bwd):
    return Tensor(data, parents=parents, bwd=bwd)


def add(a, b):
    a, b = wrap(a), wrap(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b):
    a, b = wrap(a), wrap(b)
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a, b):
    a, b = wrap(a), wrap(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape),
                            _unbroadcast(g * a.data, b.data.shape)))


def div(a, b):
    a, b = wrap(a), wrap(b)
    return _node(a.data / b.data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.data.shape),
                            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def matmul(a, b):
    a, b = wrap(a), wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    return _node(backend.matmul(a.data, b.data), (a, b),
                 lambda g: (backend.matmul(g, b.data.T.copy()),
                            backend.matmul(a.data.T.copy(), g)))


def transpose(a):
    a = wrap(a)
    return _node(a.data.T.copy(), (a,), lambda g: (g.T.copy(),))


def relu(a):
    a = wrap(a)
    x2d = a.data.ndim == 2
    y = backend.relu(a.data) if x2d else np.maximum(a.data, 0.0)
    if x2d:
        return _node(y, (a,), lambda g: (backend.relu_grad(a.data, g),))
    return _node(y, (a,), lambda g: (np.where(a.data > 0.0, g, 0.0),))


def exp(a):
    a = wrap(a)
    y = np.exp(a.data)
    return _node(y, (a,), lambda g: (g * y,))


def log(a):
    """Natural log with the global EPS clamp, so downstream losses stay finite."""
    a = wrap(a)
    clamped = np.maximum(a.data, EPS)
    return _node(np.log(clamped), (a,), lambda g: (np.where(a.data > EPS, g / clamped, 0.0),))


def sqrt(a):
    a = wrap(a)
    y = np.sqrt(a.data)
    return _node(y, (a,), lambda g: (g / (2.0 * y),))


def square(a):
    a = wrap(a)
    return _node(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def tsum(a, axis=None, keepdims=False):
    a = wrap(a)
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _node(y, (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    a = wrap(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    a = wrap(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def take_rows(a, idx):
    """Gather rows; backward scatter-adds (rows may repeat)."""
    a = wrap(a)
    idx = np.asarray(idx, dtype=np.intp)

    def bwd(g):
        gx = np.zeros_like(a.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _node(a.data[idx], (a,), bwd)


def concat_rows(a, b):
    a, b = wrap(a), wrap(b)
    na = a.data.shape[0]
    return _node(np.concatenate([a.data, b.data], axis=0), (a, b),
                 lambda g: (g[:na], g[na:]))


def slice_cols(a, start, stop):
    a = wrap(a)

    def bwd(g):
        gx = np.zeros_like(a.data)
        gx[:, start:stop] = g
        return (gx,)

    return _node(a.data[:, start:stop].copy(), (a,), bwd)


def softmax_rows(a, temperature=1.0):
    a = wrap(a)
    p = backend.softmax_rows(a.data, temperature)
    return _node(p, (a,), lambda g: (backend.softmax_rows_grad(p, g, temperature),))


def l2_normalize(a):
    """Row-normalize to unit L2 norm; near-zero rows map smoothly to ~0."""
    a = wrap(a)
    sq = tsum(square(a), axis=a.data.ndim - 1, keepdims=True)
    return div(a, sqrt(add(sq, EPS)))


def linear(x, w, b):
    """x @ w + b with a row-broadcast bias."""
    return add(matmul(x, w), b)


def backward(loss):
    """Reverse sweep from a scalar node; fills .grad on every reachable leaf."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss node")
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if id(node) in seen:
            continue
        if done:
            seen.add(id(node))
            topo.append(node)
            continue
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._bwd is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._bwd(node.grad)):
            if not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.array(g, dtype=np.float64)
            else:
                parent.grad = parent.grad + g


def grad_or_zero(t):
    return t.grad if t.grad is not None else np.zeros_like(t.data)
