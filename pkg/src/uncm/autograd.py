"""Minimal reverse-mode automatic differentiation over numpy arrays.

Tape-based, define-by-run. Doubles are the working precision so that
finite-difference gradient checks can be tight; inference may downcast.
Supported primitives: matmul, elementwise add/sub/mul/div, concat,
embedding lookup, sigmoid, tanh, exp, log, sqrt, softmax, L2-norm
clipping, sum/mean reductions, and masked categorical cross-entropy.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible for the requested primitive."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf appeared where the contract requires finite values."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (fast inference path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense array plus the backward closure that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad and _grad_enabled
        self.grad: np.ndarray | None = None
        self._backward: Callable[[], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded tape."""
        if self.data.size != 1:
            raise ShapeError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # -- operator sugar ------------------------------------------------
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_tape(*ts: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad for t in ts)


def _make(data: np.ndarray, parents: Iterable[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    parents = tuple(parents)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic ---------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad, b.data.shape))

    out = _make(data, (a, b), backward)
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-out.grad, b.data.shape))

    out = _make(data, (a, b), backward)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))

    out = _make(data, (a, b), backward)
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(
                _unbroadcast(-out.grad * a.data / (b.data**2), b.data.shape)
            )

    out = _make(data, (a, b), backward)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-d operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}"
        )
    data = a.data @ b.data

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ out.grad)

    out = _make(data, (a, b), backward)
    return out


# -- nonlinearities -------------------------------------------------------


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # two-branch form avoids exp overflow for large |x|
    x = a.data
    data = np.where(
        x >= 0,
        1.0 / (1.0 + np.exp(-np.clip(x, 0, None))),
        np.exp(np.clip(x, None, 0)) / (1.0 + np.exp(np.clip(x, None, 0))),
    )

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * data * (1.0 - data))

    out = _make(data, (a,), backward)
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * (1.0 - data**2))

    out = _make(data, (a,), backward)
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * (a.data > 0))

    out = _make(data, (a,), backward)
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * data)

    out = _make(data, (a,), backward)
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad / a.data)

    out = _make(data, (a,), backward)
    return out


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * 0.5 / data)

    out = _make(data, (a,), backward)
    return out


def softmax(a, axis: int = -1) -> Tensor:
    """Row-stable softmax; outputs are nonnegative and sum to 1 per row."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward():
        if a.requires_grad:
            g = out.grad
            dot = (g * data).sum(axis=axis, keepdims=True)
            a._accumulate(data * (g - dot))

    out = _make(data, (a,), backward)
    return out


# -- structural ops -------------------------------------------------------


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * data.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(out.grad[tuple(idx)])

    out = _make(data, tensors, backward)
    return out


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    a = as_tensor(a)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    data = a.data[idx]

    def backward():
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g[idx] = out.grad
            a._accumulate(g)

    out = _make(data, (a,), backward)
    return out


def transpose(a) -> Tensor:
    a = as_tensor(a)
    data = a.data.T

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad.T)

    out = _make(data, (a,), backward)
    return out


def take_rows(a, ids) -> Tensor:
    """Row gather (same mechanics as an embedding lookup)."""
    return embedding(a, ids)


def embedding(table, ids) -> Tensor:
    """Row lookup; ids is an integer array, gradients scatter-add back."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError(
            f"embedding ids out of range [0, {table.data.shape[0]}): "
            f"min={ids.min()}, max={ids.max()}"
        )
    data = table.data[ids]

    def backward():
        if table.requires_grad:
            g = np.zeros_like(table.data)
            np.add.at(g, ids, out.grad)
            table._accumulate(g)

    out = _make(data, (table,), backward)
    return out


def reduce_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis)

    def backward():
        if a.requires_grad:
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    out = _make(np.asarray(data), (a,), backward)
    return out


def reduce_mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis)
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward():
        if a.requires_grad:
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape) / count)

    out = _make(np.asarray(data), (a,), backward)
    return out


def clip_by_norm(a, max_norm: float, axis: int = -1) -> Tensor:
    """Scale rows down so each L2 norm along `axis` is at most `max_norm`.

    Implements v / max(1, ||v|| / s): the identity inside the ball,
    a radial projection outside it.
    """
    if max_norm <= 0:
        raise ValueError(f"clip norm must be positive, got {max_norm}")
    a = as_tensor(a)
    norms = np.sqrt((a.data**2).sum(axis=axis, keepdims=True))
    scale = 1.0 / np.maximum(1.0, norms / max_norm)
    data = a.data * scale

    def backward():
        if a.requires_grad:
            g = out.grad
            inside = norms <= max_norm
            # outside the ball: d/dv [s * v/||v||] = s/||v|| (I - vv^T/||v||^2)
            safe = np.where(norms == 0, 1.0, norms)
            radial = (g * a.data).sum(axis=axis, keepdims=True) / (safe**2)
            outside_grad = scale * (g - a.data * radial)
            a._accumulate(np.where(inside, g, outside_grad))

    out = _make(data, (a,), backward)
    return out


def cross_entropy(logits, target_ids, mask=None) -> Tensor:
    """Per-row categorical cross-entropy from raw logits.

    Returns a length-B tensor of -log softmax(logits)[i, target_ids[i]],
    multiplied by `mask` (float, same length) when given.
    """
    logits = as_tensor(logits)
    target_ids = np.asarray(target_ids, dtype=np.int64)
    if logits.data.ndim != 2 or target_ids.shape != (logits.data.shape[0],):
        raise ShapeError(
            f"cross_entropy expects logits [B, V] and targets [B], got "
            f"{logits.data.shape} and {target_ids.shape}"
        )
    m = np.ones(len(target_ids)) if mask is None else np.asarray(mask, dtype=np.float64)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(target_ids)), target_ids]
    data = (logz - picked) * m

    def backward():
        if logits.requires_grad:
            p = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
            p[np.arange(len(target_ids)), target_ids] -= 1.0
            logits._accumulate(p * (out.grad * m)[:, None])

    out = _make(data, (logits,), backward)
    return out


def check_finite(x: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {where}")
    return x
