"""Minimal reverse-mode autodiff over numpy arrays.

Every op builds a Var whose backward closure scatters gradients into its
parents; backward(loss) walks the recorded graph in reverse topological
order. Only the fixed set of ops the policy/value networks need is
provided; everything is float64.
"""

from __future__ import annotations

import numpy as np


class BackwardWithoutForwardError(RuntimeError):
    """backward() was called on a Var with no recorded graph."""


class Var:
    __slots__ = ("data", "grad", "parents", "_bw")

    def __init__(self, data, parents=(), bw=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._bw = bw

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(shape={self.data.shape})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    out = Var(x.data + y.data, (x, y))

    def bw():
        x._accumulate(_unbroadcast(out.grad, x.data.shape))
        y._accumulate(_unbroadcast(out.grad, y.data.shape))

    out._bw = bw
    return out


def sub(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    out = Var(x.data - y.data, (x, y))

    def bw():
        x._accumulate(_unbroadcast(out.grad, x.data.shape))
        y._accumulate(_unbroadcast(-out.grad, y.data.shape))

    out._bw = bw
    return out


def mul(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    out = Var(x.data * y.data, (x, y))

    def bw():
        x._accumulate(_unbroadcast(out.grad * y.data, x.data.shape))
        y._accumulate(_unbroadcast(out.grad * x.data, y.data.shape))

    out._bw = bw
    return out


def matmul(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    out = Var(x.data @ y.data, (x, y))

    def bw():
        x._accumulate(out.grad @ y.data.T)
        y._accumulate(x.data.T @ out.grad)

    out._bw = bw
    return out


def tanh(x) -> Var:
    x = as_var(x)
    t = np.tanh(x.data)
    out = Var(t, (x,))

    def bw():
        x._accumulate(out.grad * (1.0 - t * t))

    out._bw = bw
    return out


def sigmoid(x) -> Var:
    x = as_var(x)
    s = 1.0 / (1.0 + np.exp(-x.data))
    out = Var(s, (x,))

    def bw():
        x._accumulate(out.grad * s * (1.0 - s))

    out._bw = bw
    return out


def relu(x) -> Var:
    x = as_var(x)
    out = Var(np.maximum(x.data, 0.0), (x,))

    def bw():
        x._accumulate(out.grad * (x.data > 0.0))

    out._bw = bw
    return out


def exp(x) -> Var:
    x = as_var(x)
    e = np.exp(x.data)
    out = Var(e, (x,))

    def bw():
        x._accumulate(out.grad * e)

    out._bw = bw
    return out


def log(x) -> Var:
    x = as_var(x)
    out = Var(np.log(x.data), (x,))

    def bw():
        x._accumulate(out.grad / x.data)

    out._bw = bw
    return out


def square(x) -> Var:
    x = as_var(x)
    out = Var(x.data * x.data, (x,))

    def bw():
        x._accumulate(out.grad * 2.0 * x.data)

    out._bw = bw
    return out


def vsum(x, axis=None) -> Var:
    x = as_var(x)
    out = Var(x.data.sum(axis=axis), (x,))

    def bw():
        g = out.grad
        if axis is not None:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape).copy())

    out._bw = bw
    return out


def vmean(x) -> Var:
    x = as_var(x)
    out = Var(np.asarray(x.data.mean()), (x,))

    def bw():
        x._accumulate(np.full_like(x.data, out.grad / x.data.size))

    out._bw = bw
    return out


def minimum(x, y) -> Var:
    """Elementwise min; on ties the gradient routes to x."""
    x, y = as_var(x), as_var(y)
    take_x = x.data <= y.data
    out = Var(np.where(take_x, x.data, y.data), (x, y))

    def bw():
        x._accumulate(_unbroadcast(out.grad * take_x, x.data.shape))
        y._accumulate(_unbroadcast(out.grad * ~take_x, y.data.shape))

    out._bw = bw
    return out


def clip(x, lo: float, hi: float) -> Var:
    """Clamp to [lo, hi] with zero gradient outside the band."""
    x = as_var(x)
    inside = (x.data >= lo) & (x.data <= hi)
    out = Var(np.clip(x.data, lo, hi), (x,))

    def bw():
        x._accumulate(out.grad * inside)

    out._bw = bw
    return out


def log_softmax(x) -> Var:
    """Row-wise log-softmax over the last axis (numerically stabilized)."""
    x = as_var(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    lp = shifted - lse
    out = Var(lp, (x,))

    def bw():
        p = np.exp(lp)
        x._accumulate(out.grad - p * out.grad.sum(axis=-1, keepdims=True))

    out._bw = bw
    return out


def take_rows(x, idx) -> Var:
    """out[i] = x[i, idx[i]] for integer index vector idx."""
    x = as_var(x)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(x.data.shape[0])
    out = Var(x.data[rows, idx], (x,))

    def bw():
        g = np.zeros_like(x.data)
        np.add.at(g, (rows, idx), out.grad)
        x._accumulate(g)

    out._bw = bw
    return out


def concat(parts, axis=1) -> Var:
    parts = [as_var(p) for p in parts]
    out = Var(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def bw():
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(offset, offset + size)
            p._accumulate(out.grad[tuple(sl)])
            offset += size

    out._bw = bw
    return out


def backward(loss: Var) -> None:
    """Reverse-mode sweep from a recorded scalar loss; fills leaf .grad fields."""
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    if not loss.parents:
        raise BackwardWithoutForwardError("backward requires a recorded forward graph")
    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._bw is not None and node.grad is not None:
            node._bw()
