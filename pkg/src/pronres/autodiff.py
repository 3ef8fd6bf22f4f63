"""A small tape-free reverse-mode autodiff over numpy arrays.

Only the operations the span model needs are provided.  Every op returns a
new :class:`Tensor` that remembers its parents and a closure mapping the
upstream gradient to parent gradients; :meth:`Tensor.backward` walks the
graph in reverse topological order.  All arithmetic is float64.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents: tuple[Tensor, ...] = parents
        self.backward_fn: Callable | None = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}>"

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.value)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value, name=None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def linear(x, w, b=None) -> Tensor:
    """``x @ w (+ b)`` for ``x`` of any rank; ``w`` is a matrix or a vector."""
    x, w = as_tensor(x), as_tensor(w)
    out = x.value @ w.value
    parents = (x, w) if b is None else (x, w, as_tensor(b))
    if b is not None:
        out = out + parents[2].value

    def backward(g):
        if w.value.ndim == 1:
            gx = g[..., None] * w.value
            gw = np.tensordot(g, x.value, axes=g.ndim)
        else:
            gx = g @ w.value.T
            flat_x = x.value.reshape(-1, x.shape[-1])
            gw = flat_x.T @ g.reshape(-1, g.shape[-1])
        grads = [gx, gw]
        if b is not None:
            grads.append(_unbroadcast(g, parents[2].shape))
        return grads

    return Tensor(out, parents, backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.value > 0
    return Tensor(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid(x.value)
    return Tensor(out, (x,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def softplus(x) -> Tensor:
    """``log(1 + exp(x))`` computed without overflow."""
    x = as_tensor(x)
    return Tensor(np.logaddexp(0.0, x.value), (x,), lambda g: (g * _sigmoid(x.value),))


def concat(parts: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.value for p in parts], axis=axis)
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return np.split(g, sizes, axis=axis)

    return Tensor(out, tuple(parts), backward)


def take(x, index: np.ndarray) -> Tensor:
    """Gather rows of ``x`` along axis 0 with an integer array of any shape."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)

    def backward(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, index, g)
        return (gx,)

    return Tensor(x.value[index], (x,), backward)


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    return Tensor(np.broadcast_to(x.value, shape).copy(), (x,), lambda g: (_unbroadcast(g, x.shape),))


def expand_dims(x, axis: int) -> Tensor:
    x = as_tensor(x)
    return Tensor(np.expand_dims(x.value, axis), (x,), lambda g: (np.squeeze(g, axis=axis),))


def reduce_sum(x, axis=None) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return Tensor(x.value.sum(axis=axis), (x,), backward)


def masked_softmax(x, mask: np.ndarray | None = None, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; entries where ``mask`` is False get probability 0."""
    x = as_tensor(x)
    v = x.value if mask is None else np.where(mask, x.value, -np.inf)
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * p).sum(axis=axis, keepdims=True)
        return (p * (g - inner),)

    return Tensor(p, (x,), backward)


def masked_logsumexp(x, mask: np.ndarray | None = None, axis: int = -1) -> Tensor:
    """Log-sum-exp along ``axis`` over the entries where ``mask`` is True.

    Every slice must contain at least one unmasked entry.
    """
    x = as_tensor(x)
    v = x.value if mask is None else np.where(mask, x.value, -np.inf)
    m = v.max(axis=axis, keepdims=True)
    e = np.exp(v - m)
    s = e.sum(axis=axis, keepdims=True)
    out = (m + np.log(s)).squeeze(axis)
    p = e / s

    def backward(g):
        return (np.expand_dims(g, axis) * p,)

    return Tensor(out, (x,), backward)


def dropout(x, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rng`` is None or ``rate`` is 0."""
    if rng is None or rate <= 0.0:
        return as_tensor(x)
    keep = (rng.random(as_tensor(x).shape) >= rate) / (1.0 - rate)
    return mul(x, keep)
