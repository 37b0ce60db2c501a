"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations the graph attention model needs: broadcast arithmetic,
matmul, exp/log, piecewise-linear activations, axis sums, concatenation,
row gather, and segment sum. Values are float64 throughout so finite
difference checks run at full double precision.

Stable softmax subtracts a detached running maximum; that changes no value
and therefore no derivative, so the detachment is exact rather than an
approximation.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "exp",
    "log",
    "relu",
    "leaky_relu",
    "elu",
    "tsum",
    "reshape",
    "concat",
    "gather_rows",
    "segment_sum",
    "slice_rows",
]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray | float,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        if self.data.shape != ():
            raise ValueError("backward() expects a scalar loss")
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
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar; mixed operands are promoted to constants
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _track(*parents: Tensor) -> bool:
    return any(p.requires_grad for p in parents)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a: Tensor, b: Tensor, out: np.ndarray, da, db) -> Tensor:
    req = _track(a, b)
    result = Tensor(out, requires_grad=req, parents=(a, b) if req else ())

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(da(g), a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(db(g), b.data.shape))

    if req:
        result._backward = backward
    return result


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def div(a: Tensor, b: Tensor) -> Tensor:
    return _binary(
        a,
        b,
        a.data / b.data,
        lambda g: g / b.data,
        lambda g: -g * a.data / (b.data * b.data),
    )


def neg(a: Tensor) -> Tensor:
    req = a.requires_grad
    out = Tensor(-a.data, requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(-g)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data
    req = _track(a, b)
    out = Tensor(out_data, requires_grad=req, parents=(a, b) if req else ())

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ g)

    if req:
        out._backward = backward
    return out


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)
    req = a.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g * out_data)
    return out


def log(a: Tensor) -> Tensor:
    req = a.requires_grad
    out = Tensor(np.log(a.data), requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g / a.data)
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    req = a.requires_grad
    out = Tensor(np.where(mask, a.data, 0.0), requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g * mask)
    return out


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    mask = a.data > 0
    scale = np.where(mask, 1.0, slope)
    req = a.requires_grad
    out = Tensor(a.data * scale, requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g * scale)
    return out


def elu(a: Tensor) -> Tensor:
    mask = a.data > 0
    expm = np.exp(np.minimum(a.data, 0.0))
    out_data = np.where(mask, a.data, expm - 1.0)
    req = a.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g * np.where(mask, 1.0, expm))
    return out


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    req = a.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a,) if req else ())

    def backward(g: np.ndarray) -> None:
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        a.accumulate(np.broadcast_to(gg, a.data.shape).copy())

    if req:
        out._backward = backward
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    req = a.requires_grad
    out = Tensor(a.data.reshape(shape), requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g.reshape(a.data.shape))
    return out


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    datas = [p.data for p in parts]
    out_data = np.concatenate(datas, axis=axis)
    req = any(p.requires_grad for p in parts)
    out = Tensor(out_data, requires_grad=req, parents=tuple(parts) if req else ())

    sizes = [d.shape[axis] for d in datas]

    def backward(g: np.ndarray) -> None:
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(offset, offset + size)
                p.accumulate(g[tuple(sl)])
            offset += size

    if req:
        out._backward = backward
    return out


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    req = a.requires_grad
    out = Tensor(a.data[idx], requires_grad=req, parents=(a,) if req else ())

    def backward(g: np.ndarray) -> None:
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        a.accumulate(ga)

    if req:
        out._backward = backward
    return out


def segment_sum(a: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    out_shape = (num_segments,) + a.data.shape[1:]
    out_data = np.zeros(out_shape, dtype=np.float64)
    np.add.at(out_data, segment_ids, a.data)
    req = a.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a.accumulate(g[segment_ids])
    return out


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    req = a.requires_grad
    out = Tensor(a.data[start:stop], requires_grad=req, parents=(a,) if req else ())

    def backward(g: np.ndarray) -> None:
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        a.accumulate(ga)

    if req:
        out._backward = backward
    return out
