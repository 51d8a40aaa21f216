"""Inference FLOPs and trainable-weight counts of one hyper-edge update layer.

Accounting: a multiply-add is 2 FLOPs, so mixing ``C_l`` input channels into
one output costs ``2 C_l - 1``. Each axis sum is computed once per input
channel and reused by every output channel. Adding the per-term results
together (and the bias) is not counted, as in the closed-form table.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

KINDS = ("1d", "2d", "3d")


@dataclass(frozen=True)
class ComplexityQuery:
    kind: str
    C_l: int
    C_l1: int
    K: int = 1
    N_t: int = 1
    N_s: int = 1

    def __post_init__(self):
        if self.kind.lower() not in KINDS:
            raise ValueError(f"unsupported kind {self.kind!r}; expected one of {KINDS}")
        for name in ("C_l", "C_l1", "K", "N_t", "N_s"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")

    @property
    def dims(self) -> tuple[int, ...]:
        return {"1d": (self.N_t,), "2d": (self.K, self.N_t), "3d": (self.K, self.N_t, self.N_s)}[self.kind.lower()]


def flops(q: ComplexityQuery) -> int:
    """Closed-form FLOP count of the 1D/2D/3D layers."""
    a, b = q.C_l, q.C_l1
    K, N_t, N_s = q.K, q.N_t, q.N_s
    kind = q.kind.lower()
    if kind == "1d":
        return (2 * a - 1) * b * (N_t + 1) + a * (N_t - 1)
    if kind == "2d":
        return (2 * a - 1) * b * (K * N_t + K + N_t) + a * (K * (N_t - 1) + (K - 1) * N_t)
    return (2 * a - 1) * b * (K * N_t * N_s + K * N_t + K * N_s + N_t * N_s) + a * (
        K * N_t * (N_s - 1) + K * (N_t - 1) * N_s + (K - 1) * N_t * N_s
    )


def flops_nd(dims, C_l: int, C_l1: int) -> int:
    """Same accounting for any number of independent sets."""
    dims = tuple(dims)
    n = prod(dims)
    terms = n + sum(n // d for d in dims)
    sums = sum((d - 1) * (n // d) for d in dims)
    return (2 * C_l - 1) * C_l1 * terms + C_l * sums


def weight_count(q: ComplexityQuery) -> int:
    return (len(q.dims) + 1) * q.C_l * q.C_l1


def weight_count_nd(ndim: int, C_l: int, C_l1: int) -> int:
    return (ndim + 1) * C_l * C_l1


def counted_forward(x: np.ndarray, w_self: np.ndarray, w_axes: list[np.ndarray]):
    """Reference layer evaluated with scalar loops, counting every FLOP.

    ``x`` has shape ``(C_l, *dims)``; ``w_self`` and each ``w_axes[d]`` are
    ``(C_l1, C_l)``. Computes ``sum_c w_self[o, c] x[c] + sum_d sum_c w_d[o, c] S_d[c]``
    where ``S_d`` is the full sum along set axis ``d`` (broadcast back).
    Returns ``(output, flop_count)``.
    """
    C_l = x.shape[0]
    dims = x.shape[1:]
    C_l1 = w_self.shape[0]
    count = 0
    sums = []
    for d in range(len(dims)):
        S = np.zeros((C_l,) + dims[:d] + dims[d + 1 :])
        for idx in np.ndindex(*S.shape):
            c, rest = idx[0], idx[1:]
            acc = x[(c,) + rest[:d] + (0,) + rest[d:]]
            for j in range(1, dims[d]):
                acc = acc + x[(c,) + rest[:d] + (j,) + rest[d:]]
                count += 1
            S[idx] = acc
        sums.append(S)

    def mix(w, t):
        nonlocal count
        out = np.zeros((C_l1,) + t.shape[1:])
        for o in range(C_l1):
            for pos in np.ndindex(*t.shape[1:]):
                acc = w[o, 0] * t[(0,) + pos]
                count += 1
                for c in range(1, C_l):
                    acc = acc + w[o, c] * t[(c,) + pos]
                    count += 2
                out[(o,) + pos] = acc
        return out

    out = mix(w_self, x)
    for d, S in enumerate(sums):
        out = out + np.expand_dims(mix(w_axes[d], S), 1 + d)  # combining terms: not counted
    return out, count
