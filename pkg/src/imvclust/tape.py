"""Reverse-mode automatic differentiation over numpy arrays.

Implements exactly the operations the training objectives need: dense
algebra, pointwise nonlinearities, row softmax, reductions, row selection.
Graphs are built implicitly by calling the op functions; ``backward``
walks the DAG once in reverse topological order and accumulates gradients
into every reachable node with ``requires_grad`` set.

Nodes whose parents are all untracked carry no graph links, so evaluation
with frozen parameters costs no more than plain numpy.
"""

from __future__ import annotations

import numpy as np


class Var:
    """Array node of the tape. Leaves owned by an optimizer set ``requires_grad``."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        track = requires_grad or any(p.requires_grad for p in parents)
        self.requires_grad = track
        self._parents = parents if track else ()
        self._backward = backward if track else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Var(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x))


def _acc(v: Var, g: np.ndarray) -> None:
    if v.requires_grad:
        v.grad = g if v.grad is None else v.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(root: Var, seed_grad=None) -> None:
    """Accumulate d(root)/d(node) into ``.grad`` of every tracked node.

    ``root`` is typically a scalar loss; ``seed_grad`` overrides the
    implicit all-ones seed.
    """
    if not root.requires_grad:
        return
    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    if seed_grad is None:
        seed_grad = np.ones_like(root.data)
    root.grad = seed_grad if root.grad is None else root.grad + seed_grad
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def stopgrad(a) -> Var:
    """Detach: same data, no graph links."""
    a = as_var(a)
    return Var(a.data)


def add(a, b) -> Var:
    # python scalars stay weakly typed so float32 graphs are not promoted
    if isinstance(b, (int, float)):
        a = as_var(a)

        def bw_s(g):
            _acc(a, g)

        return Var(a.data + b, parents=(a,), backward=bw_s)
    if isinstance(a, (int, float)):
        return add(b, a)
    a, b = as_var(a), as_var(b)
    out = a.data + b.data

    def bw(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return Var(out, parents=(a, b), backward=bw)


def sub(a, b) -> Var:
    if isinstance(b, (int, float)):
        a = as_var(a)

        def bw_s(g):
            _acc(a, g)

        return Var(a.data - b, parents=(a,), backward=bw_s)
    if isinstance(a, (int, float)):
        b = as_var(b)

        def bw_l(g):
            _acc(b, -g)

        return Var(a - b.data, parents=(b,), backward=bw_l)
    a, b = as_var(a), as_var(b)
    out = a.data - b.data

    def bw(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(-g, b.data.shape))

    return Var(out, parents=(a, b), backward=bw)


def mul(a, b) -> Var:
    if isinstance(b, (int, float)):
        a = as_var(a)

        def bw_s(g):
            _acc(a, g * b)

        return Var(a.data * b, parents=(a,), backward=bw_s)
    if isinstance(a, (int, float)):
        return mul(b, a)
    a, b = as_var(a), as_var(b)
    out = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return Var(out, parents=(a, b), backward=bw)


def div(a, b) -> Var:
    if isinstance(b, (int, float)):
        return mul(a, 1.0 / b)
    if isinstance(a, (int, float)):
        b = as_var(b)
        out = a / b.data

        def bw_l(g):
            _acc(b, -g * a / (b.data * b.data))

        return Var(out, parents=(b,), backward=bw_l)
    a, b = as_var(a), as_var(b)
    out = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return Var(out, parents=(a, b), backward=bw)


def neg(a) -> Var:
    a = as_var(a)

    def bw(g):
        _acc(a, -g)

    return Var(-a.data, parents=(a,), backward=bw)


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _acc(a, g @ b.data.T)
        if b.requires_grad:
            _acc(b, a.data.T @ g)

    return Var(out, parents=(a, b), backward=bw)


def transpose(a) -> Var:
    a = as_var(a)

    def bw(g):
        _acc(a, g.T)

    return Var(a.data.T, parents=(a,), backward=bw)


def reshape(a, shape) -> Var:
    a = as_var(a)

    def bw(g):
        _acc(a, g.reshape(a.data.shape))

    return Var(a.data.reshape(shape), parents=(a,), backward=bw)


def vsum(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _acc(a, np.broadcast_to(gg, a.data.shape))

    return Var(out, parents=(a,), backward=bw)


def vmean(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    n = a.data.size if axis is None else (
        np.prod([a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))])
    )
    total = vsum(a, axis=axis, keepdims=keepdims)
    return mul(total, 1.0 / float(n))


def log(a) -> Var:
    a = as_var(a)

    def bw(g):
        _acc(a, g / a.data)

    return Var(np.log(a.data), parents=(a,), backward=bw)


def exp(a) -> Var:
    a = as_var(a)
    out = np.exp(a.data)

    def bw(g):
        _acc(a, g * out)

    return Var(out, parents=(a,), backward=bw)


def sqrt(a) -> Var:
    a = as_var(a)
    out = np.sqrt(a.data)

    def bw(g):
        _acc(a, g * (0.5 / out))

    return Var(out, parents=(a,), backward=bw)


def relu(a) -> Var:
    a = as_var(a)
    mask = a.data > 0

    def bw(g):
        _acc(a, g * mask)

    return Var(a.data * mask, parents=(a,), backward=bw)


def leaky_relu(a, slope=0.2) -> Var:
    a = as_var(a)
    factor = np.where(a.data > 0, 1.0, slope).astype(a.data.dtype)

    def bw(g):
        _acc(a, g * factor)

    return Var(a.data * factor, parents=(a,), backward=bw)


def sigmoid(a) -> Var:
    a = as_var(a)
    # tanh form is stable for large |x|
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def bw(g):
        _acc(a, g * out * (1.0 - out))

    return Var(out, parents=(a,), backward=bw)


def softmax(a) -> Var:
    """Row softmax with the fused Jacobian-vector backward."""
    a = as_var(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        _acc(a, (g - dot) * out)

    return Var(out, parents=(a,), backward=bw)


def clamp(a, lo=None, hi=None) -> Var:
    """Clip to [lo, hi]; gradient passes only through unclipped entries."""
    a = as_var(a)
    out = np.clip(a.data, lo, hi)
    inside = np.ones(a.data.shape, dtype=bool)
    if lo is not None:
        inside &= a.data > lo
    if hi is not None:
        inside &= a.data < hi
    # entries already strictly inside are untouched by clip; treat
    # boundary-equal entries as clipped (zero subgradient)

    def bw(g):
        _acc(a, g * inside)

    return Var(out, parents=(a,), backward=bw)


def take_rows(a, idx) -> Var:
    a = as_var(a)
    idx = np.asarray(idx)

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _acc(a, full)

    return Var(a.data[idx], parents=(a,), backward=bw)
