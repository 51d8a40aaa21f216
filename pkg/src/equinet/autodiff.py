"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations needed by the equivariant layers and the rate objectives
are provided. Every op records its parents with a closure mapping the output
gradient to each parent's gradient; :meth:`Var.backward` replays them in
reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Var:
    __slots__ = ("data", "grad", "requires_grad", "_parents")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, data, requires_grad: bool = False, _parents=()):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[tuple["Var", Callable], ...] = _parents

    # construction -----------------------------------------------------------
    @staticmethod
    def _make(data, parents: Sequence[tuple["Var", Callable]]) -> "Var":
        live = tuple((p, fn) for p, fn in parents if p.requires_grad)
        if not _GRAD_ENABLED or not live:
            return Var(data)
        return Var(data, True, live)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        return f"Var(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    # backward ---------------------------------------------------------------
    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Var] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, fn in node._parents:
                pg = fn(g)
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # arithmetic -------------------------------------------------------------
    def _coerce(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        arr = np.asarray(other)
        # python scalars must not promote float32 graphs to float64
        if arr.ndim == 0 and np.issubdtype(self.data.dtype, np.floating):
            arr = arr.astype(self.data.dtype)
        return Var(arr)

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other
        return Var._make(
            a.data + b.data,
            [(a, lambda g: _unbroadcast(g, a.shape)), (b, lambda g: _unbroadcast(g, b.shape))],
        )

    __radd__ = __add__

    def __neg__(self):
        return Var._make(-self.data, [(self, lambda g: -g)])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        return Var._make(
            a.data * b.data,
            [
                (a, lambda g: _unbroadcast(g * b.data, a.shape)),
                (b, lambda g: _unbroadcast(g * a.data, b.shape)),
            ],
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self, other
        out = a.data / b.data
        return Var._make(
            out,
            [
                (a, lambda g: _unbroadcast(g / b.data, a.shape)),
                (b, lambda g: _unbroadcast(-g * out / b.data, b.shape)),
            ],
        )

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, exponent: float):
        a = self
        return Var._make(a.data**exponent, [(a, lambda g: g * exponent * a.data ** (exponent - 1))])

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def ga(g):
            return _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)

        def gb(g):
            return _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)

        return Var._make(a.data @ b.data, [(a, ga), (b, gb)])

    def __rmatmul__(self, other):
        return self._coerce(other) @ self

    # reductions and shape ---------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, a.shape).copy()

        # float32 sums accumulate in float64: the rounded result then does not
        # depend on element order, so permuted inputs give bitwise-permuted sums
        acc = np.float64 if a.data.dtype == np.float32 else None
        out = a.data.sum(axis=axis, keepdims=keepdims, dtype=acc).astype(a.data.dtype, copy=False)
        return Var._make(out, [(a, back)])

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            n = int(np.prod([self.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        a = self
        return Var._make(a.data.reshape(*shape), [(a, lambda g: g.reshape(a.shape))])

    def transpose(self, *axes):
        a = self
        axes = axes[0] if len(axes) == 1 and isinstance(axes[0], (tuple, list)) else axes
        inv = np.argsort(axes)
        return Var._make(a.data.transpose(axes), [(a, lambda g: g.transpose(inv))])

    def swapaxes(self, i: int, j: int):
        a = self
        return Var._make(np.swapaxes(a.data, i, j), [(a, lambda g: np.swapaxes(g, i, j))])

    def __getitem__(self, idx):
        a = self
        basic = all(not isinstance(i, (np.ndarray, list)) for i in (idx if isinstance(idx, tuple) else (idx,)))

        def back(g):
            out = np.zeros_like(a.data)
            if basic:
                out[idx] = g
            else:
                np.add.at(out, idx, g)
            return out

        return Var._make(a.data[idx], [(a, back)])

    def broadcast_to(self, shape):
        a = self
        return Var._make(np.broadcast_to(a.data, shape), [(a, lambda g: _unbroadcast(g, a.shape))])


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def parameter(data) -> Var:
    return Var(np.array(data), requires_grad=True)


def relu(x: Var) -> Var:
    mask = x.data > 0  # subgradient 0 at 0
    return Var._make(np.where(mask, x.data, 0), [(x, lambda g: g * mask)])


def sigmoid(x: Var) -> Var:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Var._make(s, [(x, lambda g: g * s * (1.0 - s))])


def log(x: Var) -> Var:
    return Var._make(np.log(x.data), [(x, lambda g: g / x.data)])


def log2(x: Var) -> Var:
    return log(x) * (1.0 / np.log(2.0))


def sqrt(x: Var) -> Var:
    out = np.sqrt(x.data)
    return Var._make(out, [(x, lambda g: g * 0.5 / out)])


def concat(xs: Sequence[Var], axis: int = 0) -> Var:
    xs = [as_var(x) for x in xs]
    splits = np.cumsum([x.shape[axis] for x in xs])[:-1]
    data = np.concatenate([x.data for x in xs], axis=axis)
    parents = []
    for i, x in enumerate(xs):
        parents.append((x, lambda g, i=i: np.split(g, splits, axis=axis)[i]))
    return Var._make(data, parents)


def stack(xs: Sequence[Var], axis: int = 0) -> Var:
    xs = [as_var(x) for x in xs]
    return concat([x.reshape(x.shape[:axis] + (1,) + x.shape[axis:]) for x in xs], axis=axis)


def channel_mix(w: Var, x: Var) -> Var:
    """``out[b, o, ...] = sum_c w[o, c] * x[b, c, ...]``."""
    w, x = as_var(w), as_var(x)
    B, C = x.shape[:2]
    X = x.data.reshape(B, C, -1)
    out = (w.data @ X).reshape((B, w.shape[0]) + x.shape[2:])

    def gw(g):
        G = g.reshape(B, w.shape[0], -1)
        return np.tensordot(G, X, axes=([0, 2], [0, 2]))

    def gx(g):
        return (w.data.T @ g.reshape(B, w.shape[0], -1)).reshape(x.shape)

    return Var._make(out, [(w, gw), (x, gx)])


def unit_phase(re: Var, im: Var) -> tuple[Var, Var]:
    """Entrywise ``z / |z|`` on a (re, im) pair; ``0`` maps to ``1 + 0j``."""
    re, im = as_var(re), as_var(im)
    r = np.hypot(re.data, im.data)
    zero = r == 0
    safe = np.where(zero, 1.0, r)
    ur = np.where(zero, 1.0, re.data / safe)
    ui = np.where(zero, 0.0, im.data / safe)
    # d(ur)/d(re) = ui^2 / r, d(ur)/d(im) = -ur ui / r, d(ui)/d(re) = -ur ui / r, d(ui)/d(im) = ur^2 / r
    inv = np.where(zero, 0.0, 1.0 / safe)
    out_re = Var._make(ur, [(re, lambda g: g * ui * ui * inv), (im, lambda g: -g * ur * ui * inv)])
    out_im = Var._make(ui, [(re, lambda g: -g * ur * ui * inv), (im, lambda g: g * ur * ur * inv)])
    return out_re, out_im


def value_and_grad(fn: Callable[..., Var], params: Sequence[Var]) -> tuple[float, list[np.ndarray]]:
    for p in params:
        p.grad = None
    out = fn()
    out.backward()
    return out.item(), [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]
