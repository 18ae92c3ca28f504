"""Reverse-mode automatic differentiation on numpy arrays.

Define-by-run tape: every operation eagerly computes its value and records
vector-Jacobian callbacks linking back to its parents.  The same functions
double as plain numpy when no ``Node`` is involved, so formula code
(Poincare maps, losses) is written once and runs in both a fast inference
path and a differentiable training path.

Primitive set: add/sub/mul/div (broadcasting), matmul, dot, norm, tanh,
artanh, arcosh, sqrt, exp, log, positive part, clip, sum/mean, row gather.
Domain-restricted primitives clamp their inputs identically in both paths
so analytic and numeric gradients see the same function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_NORM = 1e-15
ATANH_CLIP = 1.0 - 1e-15


class GradError(Exception):
    pass


class Node:
    """One value in the compute graph, with links to its parents."""

    # keep numpy from absorbing us into object arrays
    __array_ufunc__ = None
    __slots__ = ("value", "parents", "vjps", "adjoint")

    def __init__(self, value, parents=(), vjps=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjps = vjps
        self.adjoint = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.value!r})"

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


def is_node(x) -> bool:
    return isinstance(x, Node)


def _any_node(*xs) -> bool:
    return any(isinstance(x, Node) for x in xs)


def _nodify(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def value_of(x):
    """Underlying ndarray of a Node, or the input coerced to float array."""
    if isinstance(x, Node):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    g = np.asarray(g, dtype=np.float64)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# arithmetic

def add(a, b):
    if not _any_node(a, b):
        return np.add(a, b)
    a, b = _nodify(a), _nodify(b)
    sa, sb = a.value.shape, b.value.shape
    return Node(a.value + b.value, (a, b),
                (lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(g, sb)))


def sub(a, b):
    if not _any_node(a, b):
        return np.subtract(a, b)
    a, b = _nodify(a), _nodify(b)
    sa, sb = a.value.shape, b.value.shape
    return Node(a.value - b.value, (a, b),
                (lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(-g, sb)))


def mul(a, b):
    if not _any_node(a, b):
        return np.multiply(a, b)
    a, b = _nodify(a), _nodify(b)
    va, vb = a.value, b.value
    return Node(va * vb, (a, b),
                (lambda g: _unbroadcast(g * vb, va.shape),
                 lambda g: _unbroadcast(g * va, vb.shape)))


def div(a, b):
    if not _any_node(a, b):
        return np.divide(a, b)
    a, b = _nodify(a), _nodify(b)
    va, vb = a.value, b.value
    out = va / vb
    return Node(out, (a, b),
                (lambda g: _unbroadcast(g / vb, va.shape),
                 lambda g: _unbroadcast(-g * out / vb, vb.shape)))


def matmul(a, b):
    if not _any_node(a, b):
        return np.matmul(a, b)
    a, b = _nodify(a), _nodify(b)
    va, vb = a.value, b.value
    out = va @ vb

    def ga(g):
        if va.ndim == 1 and vb.ndim == 2:      # (k,)@(k,n) -> (n,)
            return vb @ g
        if va.ndim == 2 and vb.ndim == 1:      # (m,k)@(k,) -> (m,)
            return np.outer(g, vb)
        return g @ vb.T                        # (m,k)@(k,n)

    def gb(g):
        if va.ndim == 1 and vb.ndim == 2:
            return np.outer(va, g)
        if va.ndim == 2 and vb.ndim == 1:
            return va.T @ g
        return va.T @ g

    return Node(out, (a, b), (ga, gb))


def transpose(a):
    if not is_node(a):
        return np.transpose(a)
    return Node(a.value.T, (a,), (lambda g: g.T,))


# ---------------------------------------------------------------------------
# elementwise functions

def tanh(x):
    if not is_node(x):
        return np.tanh(x)
    t = np.tanh(x.value)
    return Node(t, (x,), (lambda g: g * (1.0 - t * t),))


def artanh(x):
    """Inverse hyperbolic tangent, input clipped to the open interval."""
    if not is_node(x):
        return np.arctanh(np.clip(x, -ATANH_CLIP, ATANH_CLIP))
    xc = np.clip(x.value, -ATANH_CLIP, ATANH_CLIP)
    return Node(np.arctanh(xc), (x,), (lambda g: g / (1.0 - xc * xc),))


def arcosh(x):
    """Inverse hyperbolic cosine with the argument floored at 1."""
    if not is_node(x):
        return np.arccosh(np.maximum(x, 1.0))
    xc = np.maximum(x.value, 1.0)
    den = np.sqrt(np.maximum(xc * xc - 1.0, 1e-24))
    return Node(np.arccosh(xc), (x,), (lambda g: g / den,))


def sqrt(x):
    if not is_node(x):
        return np.sqrt(x)
    s = np.sqrt(x.value)
    return Node(s, (x,), (lambda g: g * 0.5 / np.maximum(s, MIN_NORM),))


def exp(x):
    if not is_node(x):
        return np.exp(x)
    e = np.exp(x.value)
    return Node(e, (x,), (lambda g: g * e,))


def log(x):
    if not is_node(x):
        return np.log(np.maximum(x, 1e-300))
    xc = np.maximum(x.value, 1e-300)
    return Node(np.log(xc), (x,), (lambda g: g / xc,))


def softmax(x):
    """Softmax over the last axis (stable via row-max subtraction)."""
    if not is_node(x):
        z = np.asarray(x, dtype=np.float64)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)
    z = x.value - x.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        g = np.asarray(g, dtype=np.float64)
        return p * (g - np.sum(g * p, axis=-1, keepdims=True))

    return Node(p, (x,), (vjp,))


def positive_part(x):
    """max(x, 0) -- hinge used by the triangle regularizer."""
    if not is_node(x):
        return np.maximum(x, 0.0)
    mask = (x.value > 0.0).astype(np.float64)
    return Node(x.value * mask, (x,), (lambda g: g * mask,))


def clip(x, lo, hi):
    if not is_node(x):
        return np.clip(x, lo, hi)
    mask = ((x.value > lo) & (x.value < hi)).astype(np.float64)
    return Node(np.clip(x.value, lo, hi), (x,), (lambda g: g * mask,))


# ---------------------------------------------------------------------------
# reductions and indexing

def total(x, axis=None, keepdims=False):
    if not is_node(x):
        return np.sum(x, axis=axis, keepdims=keepdims)
    shape = x.value.shape
    out = np.sum(x.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g, dtype=np.float64)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).copy()

    return Node(out, (x,), (vjp,))


def mean(x, axis=None, keepdims=False):
    n = value_of(x).size if axis is None else value_of(x).shape[axis]
    return div(total(x, axis=axis, keepdims=keepdims), float(n))


def dot(a, b, keepdims=False):
    """Inner product over the last axis."""
    return total(mul(a, b), axis=-1, keepdims=keepdims)


def sqnorm(x, keepdims=False):
    return total(mul(x, x), axis=-1, keepdims=keepdims)


def norm(x, keepdims=False):
    """Euclidean norm over the last axis, floored at MIN_NORM.

    The floor keeps divisions by the norm finite at the origin; it matches
    the zero-tangent convention of the manifold maps.
    """
    if not is_node(x):
        n = np.linalg.norm(np.asarray(x, dtype=np.float64), axis=-1,
                           keepdims=keepdims)
        return np.maximum(n, MIN_NORM)
    v = x.value
    n = np.maximum(np.sqrt(np.sum(v * v, axis=-1, keepdims=True)), MIN_NORM)
    out = n if keepdims else n[..., 0]

    def vjp(g):
        g = np.asarray(g, dtype=np.float64)
        if not keepdims:
            g = g[..., None]
        return g * v / n

    return Node(out, (x,), (vjp,))


def take_rows(table, idx):
    """Row gather `table[idx]`; backward scatter-adds into the table."""
    idx = np.asarray(idx)
    if not is_node(table):
        return np.asarray(table, dtype=np.float64)[idx]
    v = table.value

    def vjp(g):
        out = np.zeros_like(v)
        np.add.at(out, idx, g)
        return out

    return Node(v[idx], (table,), (vjp,))


# ---------------------------------------------------------------------------
# backward pass

def _topo_order(root: Node) -> list:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order  # parents before children


def gradient(output: Node, wrt) -> list:
    """Partial derivatives of a scalar output for each requested node."""
    if not isinstance(output, Node):
        raise GradError("output is not part of the compute graph")
    if output.value.size != 1:
        raise GradError("gradient requires a scalar output")
    order = _topo_order(output)
    for node in order:
        node.adjoint = np.zeros_like(node.value)
    output.adjoint = np.ones_like(output.value)
    for node in reversed(order):
        g = node.adjoint
        for parent, vjp in zip(node.parents, node.vjps):
            parent.adjoint = parent.adjoint + vjp(g)
    # nodes disconnected from the output get an exact zero gradient
    return [np.array(w.adjoint) if w.adjoint is not None
            else np.zeros_like(w.value) for w in wrt]


# ---------------------------------------------------------------------------
# finite differences

@dataclass
class GradReport:
    analytic: np.ndarray
    numeric: np.ndarray
    max_rel_err: float


def finite_diff_check(fn, point, h: float = 1e-5) -> GradReport:
    """Compare the analytic gradient of `fn` against central differences.

    `fn` maps a flat vector (ndarray or Node) to a scalar; it must be
    evaluable in an h-neighborhood of `point`.
    """
    point = np.asarray(point, dtype=np.float64)
    x = Node(point)
    out = fn(x)
    analytic = gradient(out, [x])[0].reshape(point.shape)

    numeric = np.zeros_like(point)
    flat = point.ravel()
    num_flat = numeric.ravel()
    for i in range(flat.size):
        step = np.zeros_like(flat)
        step[i] = h
        fp = float(value_of(fn((flat + step).reshape(point.shape))))
        fm = float(value_of(fn((flat - step).reshape(point.shape))))
        num_flat[i] = (fp - fm) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    max_rel_err = float(np.max(np.abs(analytic - numeric) / denom))
    return GradReport(analytic=analytic, numeric=numeric,
                      max_rel_err=max_rel_err)
