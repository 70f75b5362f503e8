"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every differentiable operation appends one node to the active :class:`Graph`
(the tape). :func:`backward` walks that tape in reverse recording order, so no
topological sort is needed: an op can only consume tensors that already exist.
"""
from __future__ import annotations

import contextlib
import threading

import numpy as np
from scipy.special import erf

from ..errors import DimensionError, InputError, NumericError, UsageError

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A float64 array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "name")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return index(self, key)

    @property
    def T(self):
        return swapaxes(self, -1, -2)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


class Graph:
    """Tape of recorded operations.

    ``nodes`` holds ``(output, parents, backward_fn)`` triples in recording
    order. ``reset`` drops the tape and clears the gradients of every tensor
    that appeared in it, leaves included.
    """

    def __init__(self):
        self.nodes = []
        self.enabled = True

    def record(self, out, parents, fn):
        self.nodes.append((out, parents, fn))

    def __len__(self):
        return len(self.nodes)

    def reset(self):
        for out, parents, _ in self.nodes:
            out.grad = None
            for p in parents:
                p.grad = None
        self.nodes.clear()


_local = threading.local()


def current_graph():
    g = getattr(_local, "graph", None)
    if g is None:
        g = _local.graph = Graph()
    return g


@contextlib.contextmanager
def graph_scope(graph=None):
    """Record into ``graph`` (a fresh one by default) for the duration."""
    prev = getattr(_local, "graph", None)
    g = Graph() if graph is None else graph
    _local.graph = g
    try:
        yield g
    finally:
        _local.graph = prev


@contextlib.contextmanager
def no_grad():
    g = current_graph()
    prev = g.enabled
    g.enabled = False
    try:
        yield
    finally:
        g.enabled = prev


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, fn):
    g = current_graph()
    req = g.enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req)
    if req:
        g.record(out, parents, fn)
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss):
    """Populate ``.grad`` on every tensor reachable from scalar ``loss``.

    Intermediate gradients are recomputed on each call, while leaf gradients
    accumulate: calling twice without ``Graph.reset`` doubles them.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    g = current_graph()
    for out, _, _ in g.nodes:
        out.grad = None
    loss.grad = np.ones_like(loss.data)
    for out, parents, fn in reversed(g.nodes):
        if out.grad is None:
            continue
        grads = fn(out.grad)
        for p, gr in zip(parents, grads):
            if gr is None or not p.requires_grad:
                continue
            gr = _unbroadcast(np.asarray(gr, dtype=np.float64), p.data.shape)
            p.grad = gr.copy() if p.grad is None else p.grad + gr


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _result(out, (a, b), lambda g: (g / b.data, -g * out / b.data))


def neg(a):
    return _result(-a.data, (a,), lambda g: (-g,))


def power(a, exponent):
    exponent = float(exponent)
    return _result(a.data ** exponent, (a,),
                   lambda g: (g * exponent * a.data ** (exponent - 1.0),))


def exp(a):
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log(a):
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    out = np.sqrt(a.data)
    return _result(out, (a,), lambda g: (0.5 * g / out,))


def sin(a):
    return _result(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a):
    return _result(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def tanh(a):
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),))


def gelu(x):
    """Exact GELU, x * Phi(x), with Phi the standard normal CDF."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return _result(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


# ------------------------------------------------------------------ reductions

def tsum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape),)

    return _result(out, (a,), fn)


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod([a.data.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def norm(a, axis=-1):
    """Euclidean norm along ``axis``; the gradient at a zero vector is taken as 0."""
    out = np.sqrt((a.data * a.data).sum(axis=axis))

    def fn(g):
        o = np.expand_dims(out, axis)
        safe = np.where(o > 0.0, o, 1.0)
        return (np.where(o > 0.0, a.data / safe, 0.0) * np.expand_dims(g, axis),)

    return _result(out, (a,), fn)


# ------------------------------------------------------------------- structure

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    return _result(a.data @ b.data, (a, b),
                   lambda g: (g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g))


def reshape(a, shape):
    src = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def swapaxes(a, i, j):
    return _result(np.swapaxes(a.data, i, j), (a,), lambda g: (np.swapaxes(g, i, j),))


def _is_advanced(key):
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


def index(a, key):
    advanced = _is_advanced(key)

    def fn(g):
        full = np.zeros_like(a.data)
        if advanced:
            np.add.at(full, key, g)
        else:
            full[key] += g
        return (full,)

    return _result(a.data[key], (a,), fn)


def take(a, indices, axis=0):
    """Gather along ``axis`` with an integer index array (duplicates allowed)."""
    indices = np.asarray(indices, dtype=np.int64)
    ax = axis % a.ndim

    def fn(g):
        full = np.zeros_like(a.data)
        moved = np.moveaxis(full, ax, 0)
        gm = np.moveaxis(g, tuple(range(ax, ax + indices.ndim)), tuple(range(indices.ndim)))
        np.add.at(moved, indices, gm)
        return (full,)

    return _result(np.take(a.data, indices, axis=ax), (a,), fn)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                   lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim
    return _result(out, tuple(tensors),
                   lambda g: tuple(np.take(g, i, axis=ax) for i in range(len(tensors))))


def broadcast_to(a, shape):
    return _result(np.broadcast_to(a.data, shape).copy(), (a,), lambda g: (g,))


# ------------------------------------------------------------- fused layers

def layer_norm(x, gain, bias, eps=1e-5):
    """Normalise the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.data.shape[-1]
    if d == 0:
        raise DimensionError("layer_norm over an empty last axis")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def fn(g):
        gx = g * gain.data
        gx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        return gx, g * xhat, g

    return _result(xhat * gain.data + bias.data, (x, gain, bias), fn)


def softmax(x, mask=None):
    """Softmax over the last axis.

    ``mask`` is a boolean "allowed" array broadcastable to ``x``; disallowed
    entries get exactly zero weight. A row with nothing allowed is rejected.
    """
    x = as_tensor(x)
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax input is not finite")
    if mask is None:
        z = x.data - x.data.max(axis=-1, keepdims=True)
        e = np.exp(z)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.data.shape)
        if not mask.any(axis=-1).all():
            raise InputError("attention mask has a row with no allowed entries")
        z = np.where(mask, x.data, -np.inf)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.where(mask, np.exp(z), 0.0)
    out = e / e.sum(axis=-1, keepdims=True)

    def fn(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _result(out, (x,), fn)

