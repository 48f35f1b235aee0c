"""A small reverse-mode differentiation layer over float64 numpy arrays.

Each :class:`Tensor` remembers the tensors it was computed from and a closure
that pushes its gradient back to them.  :meth:`Tensor.backward` walks the tape
in reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple[Tensor, ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
        name: str | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar")
            grad = np.ones_like(self.value)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # intermediate gradients are not needed after propagation
                    node.grad = None if not node._is_leaf_param() else node.grad

    def _is_leaf_param(self) -> bool:
        return not self._parents

    # operator sugar
    def __add__(self, other) -> Tensor:
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other) -> Tensor:
        return add(self, mul(as_tensor(other), -1.0))

    def __mul__(self, other) -> Tensor:
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __matmul__(self, other) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, idx) -> Tensor:
        return getitem(self, idx)

    def reshape(self, *shape) -> Tensor:
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def transpose(self, *axes) -> Tensor:
        return transpose(self, axes or None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    live = tuple(p for p in parents if p.requires_grad)
    if not live:
        return Tensor(value)
    return Tensor(value, True, live, backward)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _node(a.value + b.value, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _node(a.value * b.value, (a, b), bw)


def matmul(a, b) -> Tensor:
    """``a @ b`` for 1-D, 2-D or batched (3-D) operands."""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    out = av @ bv

    def bw(g: np.ndarray) -> None:
        if av.ndim == 1 and bv.ndim == 1:
            if a.requires_grad:
                a._accumulate(g * bv)
            if b.requires_grad:
                b._accumulate(g * av)
            return
        a2 = av[None, :] if av.ndim == 1 else av
        b2 = bv[:, None] if bv.ndim == 1 else bv
        g2 = g
        if av.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if bv.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        if a.requires_grad:
            ga = g2 @ np.swapaxes(b2, -1, -2)
            if av.ndim == 1:
                ga = ga.reshape(-1, ga.shape[-1]).sum(axis=0) if ga.ndim > 2 else ga[0]
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(a2, -1, -2) @ g2
            if bv.ndim == 1:
                gb = gb[..., 0]
            b._accumulate(_unbroadcast(gb, b.shape))

    return _node(out, (a, b), bw)


def concat(items: Sequence[Tensor], axis: int = 0) -> Tensor:
    items = [as_tensor(t) for t in items]
    sizes = [t.shape[axis] for t in items]
    splits = np.cumsum(sizes)[:-1]

    def bw(g: np.ndarray) -> None:
        for t, part in zip(items, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accumulate(part)

    return _node(np.concatenate([t.value for t in items], axis=axis), items, bw)


def stack(items: Sequence[Tensor]) -> Tensor:
    return concat([reshape(as_tensor(t), (1,) + as_tensor(t).shape) for t in items], axis=0)


def gather(a: Tensor, index) -> Tensor:
    """Rows ``a[index]`` along the first axis; repeated indices accumulate."""
    idx = np.asarray(index, dtype=np.int64)

    def bw(g: np.ndarray) -> None:
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        a._accumulate(full)

    return _node(a.value[idx], (a,), bw)


def getitem(a: Tensor, key) -> Tensor:
    def bw(g: np.ndarray) -> None:
        full = np.zeros_like(a.value)
        full[key] += g
        a._accumulate(full)

    return _node(a.value[key], (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    def bw(g: np.ndarray) -> None:
        a._accumulate(g.reshape(a.shape))

    return _node(a.value.reshape(shape), (a,), bw)


def transpose(a: Tensor, axes=None) -> Tensor:
    inv = None if axes is None else np.argsort(axes)

    def bw(g: np.ndarray) -> None:
        a._accumulate(np.transpose(g, inv))

    return _node(np.transpose(a.value, axes), (a,), bw)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)

    def bw(g: np.ndarray) -> None:
        a._accumulate(g * (1.0 - y * y))

    return _node(y, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))

    def bw(g: np.ndarray) -> None:
        a._accumulate(g * y * (1.0 - y))

    return _node(y, (a,), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def bw(g: np.ndarray) -> None:
        a._accumulate(g * mask)

    return _node(a.value * mask, (a,), bw)


def log(a: Tensor) -> Tensor:
    def bw(g: np.ndarray) -> None:
        a._accumulate(g / a.value)

    return _node(np.log(a.value), (a,), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; ``-inf`` logits get probability exactly 0."""
    z = a.value - np.max(a.value, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g: np.ndarray) -> None:
        a._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _node(y, (a,), bw)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    m = np.max(a.value, axis=axis, keepdims=True)
    z = a.value - m
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def bw(g: np.ndarray) -> None:
        a._accumulate(g - p * g.sum(axis=axis, keepdims=True))

    return _node(y, (a,), bw)


def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    def bw(g: np.ndarray) -> None:
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape))

    return _node(np.sum(a.value, axis=axis), (a,), bw)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.value.size if axis is None else a.shape[axis]
    return mul(sum(a, axis), 1.0 / n)


def parameters_zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
