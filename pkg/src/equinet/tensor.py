"""Dense tensor helpers: vec ordering, set permutations and neighbor reductions.

Tensors are plain numpy arrays in C order, so ``vec`` is ``ravel()`` with the
last index varying fastest. Complex data is carried either as numpy complex
arrays or as a pair of adjacent real channels (real, imaginary).

Permutations are 0-based index arrays. ``permute_along(t, axis, pi)`` returns
``out[..., i, ...] = t[..., pi[i], ...]``, which is ``Pi.T @ t`` along that
axis for the matrix ``Pi = materialize_perm_matrix(pi)``.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np


class Permutation:
    """A bijection on ``{0, ..., size-1}`` stored as an index array."""

    __slots__ = ("map",)

    def __init__(self, mapping: Sequence[int]):
        arr = np.asarray(mapping, dtype=np.intp)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("permutation must be a non-empty 1-D index array")
        if not np.array_equal(np.sort(arr), np.arange(arr.size)):
            raise ValueError(f"not a bijection on 0..{arr.size - 1}: {arr.tolist()}")
        self.map = arr

    @property
    def size(self) -> int:
        return int(self.map.size)

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        return cls(np.arange(size))

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(size))

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(self.size)
        return Permutation(inv)

    def __array__(self, dtype=None, copy=None):
        return self.map if dtype is None else self.map.astype(dtype)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.map, other.map)

    def __repr__(self) -> str:
        return f"Permutation({self.map.tolist()})"


def _as_perm(pi) -> np.ndarray:
    if isinstance(pi, Permutation):
        return pi.map
    return Permutation(pi).map


def _check_axis(t: np.ndarray, axis: int) -> int:
    if not -t.ndim <= axis < t.ndim:
        raise IndexError(f"axis {axis} out of range for tensor of order {t.ndim}")
    return axis % t.ndim


def flat_index(dims: Sequence[int], multi_index: Sequence[int]) -> int:
    """Position of ``multi_index`` in vec order (last index fastest)."""
    if len(dims) != len(multi_index):
        raise IndexError("multi-index order does not match dims")
    pos = 0
    for extent, i in zip(dims, multi_index):
        if not 0 <= i < extent:
            raise IndexError(f"index {i} out of range for extent {extent}")
        pos = pos * extent + i
    return pos


def permute_along(t: np.ndarray, axis: int, pi) -> np.ndarray:
    t = np.asarray(t)
    axis = _check_axis(t, axis)
    p = _as_perm(pi)
    if p.size != t.shape[axis]:
        raise ValueError(f"permutation size {p.size} != extent {t.shape[axis]} of axis {axis}")
    return np.take(t, p, axis=axis)


def neighbor_sum(t: np.ndarray, axis: int) -> np.ndarray:
    """Sum over all other positions along ``axis`` (all-but-self)."""
    t = np.asarray(t)
    axis = _check_axis(t, axis)
    return t.sum(axis=axis, keepdims=True) - t


def mean_along(t: np.ndarray, axis: int) -> np.ndarray:
    t = np.asarray(t)
    axis = _check_axis(t, axis)
    return t.mean(axis=axis)


def materialize_perm_matrix(pi) -> np.ndarray:
    """Permutation matrix ``Pi`` with ``Pi.T @ x == x[pi]``."""
    p = _as_perm(pi)
    mat = np.zeros((p.size, p.size))
    mat[p, np.arange(p.size)] = 1.0
    return mat


def kron_perm_matrix(perms: Sequence) -> np.ndarray:
    """``Pi_1.T kron ... kron Pi_n.T``, the vec-space action of per-axis permutations."""
    return reduce(np.kron, [materialize_perm_matrix(p).T for p in perms])


def vec_permutation(dims: Sequence[int], perms: Sequence) -> np.ndarray:
    """Index array ``s`` with ``vec(permuted)[r] == vec(t)[s[r]]``."""
    idx = np.arange(int(np.prod(dims))).reshape(dims)
    for axis, p in enumerate(perms):
        idx = permute_along(idx, axis, p)
    return idx.ravel()
