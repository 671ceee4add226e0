"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps an ndarray plus an optional backward closure. Ops build the
graph eagerly; ``backward()`` on a scalar result walks the tape in reverse
topological order. Only the operations the model needs are provided, all in
float64 so finite-difference checks resolve cleanly.

Tensors whose inputs all have ``requires_grad=False`` carry no closure, so
evaluation-mode forward passes pay no tape overhead beyond the wrapper.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

LOG_FLOOR = 1e-10  # global floor for every log argument


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents: tuple = ()

    # ---- graph plumbing ------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent._backward is not None or parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    # ---- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (evaluation passes)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _needs_graph(*tensors: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad or t._backward is not None
                                 for t in tensors)


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor:
    out = Tensor(data)
    if _needs_graph(*parents):
        out._parents = parents
        out._backward = backward
        out.requires_grad = True
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcast when producing it."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---- arithmetic --------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def neg(a) -> Tensor:
    a = _wrap(a)
    return _make(-a.data, (a,), lambda g: a._accumulate(-g))


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(g @ b.data.T)
        if b.requires_grad or b._backward is not None:
            b._accumulate(a.data.T @ g)

    return _make(data, (a, b), backward)


# ---- nonlinearities ----------------------------------------------------


def tanh(a) -> Tensor:
    a = _wrap(a)
    data = np.tanh(a.data)
    return _make(data, (a,), lambda g: a._accumulate(g * (1.0 - data * data)))


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    # Stable: exp only on the negative side of the split.
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _make(data, (a,), lambda g: a._accumulate(g * data * (1.0 - data)))


def exp(a) -> Tensor:
    a = _wrap(a)
    data = np.exp(a.data)
    return _make(data, (a,), lambda g: a._accumulate(g * data))


def log_clip(a, floor: float = LOG_FLOOR) -> Tensor:
    """log(max(x, floor)); gradient is zero where the floor is active."""
    a = _wrap(a)
    clipped = np.maximum(a.data, floor)
    data = np.log(clipped)
    active = (a.data > floor).astype(np.float64)
    return _make(data, (a,), lambda g: a._accumulate(g * active / clipped))


def softplus(a) -> Tensor:
    """log(1 + exp(x)) computed without overflow for large |x|."""
    a = _wrap(a)
    x = a.data
    data = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _make(data, (a,), lambda g: a._accumulate(g * sig))


def softmax(a) -> Tensor:
    """Row-stable softmax along the last axis."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        a._accumulate(data * (g - dot))

    return _make(data, (a,), backward)


def masked_softmax(scores, mask: np.ndarray) -> Tensor:
    """Softmax along the last axis restricted to positions where mask == 1.

    Masked positions get probability exactly 0. Every row must contain at
    least one unmasked position.
    """
    scores = _wrap(scores)
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != scores.data.shape:
        raise ValueError("mask shape must match scores shape")
    if not np.all(m.sum(axis=-1) > 0):
        raise ValueError("masked_softmax: every row needs at least one valid position")
    neg = np.where(m > 0, 0.0, -np.inf)
    shifted = scores.data + neg
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.exp(shifted) * m
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        scores._accumulate(data * (g - dot))

    return _make(data, (scores,), backward)


# ---- reductions and shaping -------------------------------------------


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.data.shape).copy())

    return _make(data, (a,), backward)


def mean_(a) -> Tensor:
    a = _wrap(a)
    n = a.data.size
    data = a.data.mean()
    return _make(data, (a,), lambda g: a._accumulate(np.broadcast_to(g / n, a.data.shape).copy()))


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    data = a.data.reshape(shape)
    return _make(data, (a,), lambda g: a._accumulate(g.reshape(a.data.shape)))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad or t._backward is not None:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return _make(data, tuple(tensors), backward)


def take(a, idx) -> Tensor:
    """Basic indexing (ints/slices); backward scatters into zeros."""
    a = _wrap(a)
    data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        a._accumulate(full)

    return _make(np.array(data, copy=True), (a,), backward)


# ---- model-specific fused ops -----------------------------------------


def embedding(table, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` for an integer id array of any shape."""
    table = _wrap(table)
    ids = np.asarray(ids, dtype=np.int64)
    data = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        table._accumulate(full)

    return _make(data, (table,), backward)


def weighted_sum(weights, values) -> Tensor:
    """Pool values [B, L, H] with weights [B, L] into [B, H]."""
    weights, values = _wrap(weights), _wrap(values)
    w, v = weights.data, values.data
    if w.ndim != 2 or v.ndim != 3 or w.shape != v.shape[:2]:
        raise ValueError("weighted_sum expects weights [B, L] and values [B, L, H]")
    data = np.einsum("bl,blh->bh", w, v)

    def backward(g):
        if weights.requires_grad or weights._backward is not None:
            weights._accumulate(np.einsum("bh,blh->bl", g, v))
        if values.requires_grad or values._backward is not None:
            values._accumulate(w[:, :, None] * g[:, None, :])

    return _make(data, (weights, values), backward)


def gather_time(a, idx: np.ndarray) -> Tensor:
    """Reorder the time axis per batch row: out[b, t] = a[b, idx[b, t]].

    Used to reverse variable-length sequences for the backward GRU direction.
    """
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.int64)
    batch = np.arange(a.data.shape[0])[:, None]
    data = a.data[batch, idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (batch, idx), g)
        a._accumulate(full)

    return _make(data, (a,), backward)


def affine(x, w, b=None) -> Tensor:
    """x @ w (+ b): the bread-and-butter projection."""
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out
