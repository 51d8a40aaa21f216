"""Parameter-sharing structure of permutation-equivariant linear maps.

A linear map between two index spaces built from the sets of a
:class:`SetSignature` is equivariant iff its matrix is constant on the orbits of
the group acting on (output index, input index) pairs. The orbits are found by
brute-force connected components over the pair graph whose edges are the group
generators, so vacuous classes at small set sizes are never over-counted.

Orbit ids are canonical: orbits are numbered in increasing order of their
smallest member, where a pair ``(r, c)`` has flat position ``r * n_in + c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from equinet.tensor import vec_permutation


@dataclass(frozen=True)
class SetSpec:
    """One set of a problem. ``subsets`` makes it a nested set of blocks."""

    name: str
    size: int
    subsets: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"set {self.name!r} must have positive size")
        if self.subsets is not None:
            object.__setattr__(self, "subsets", tuple(int(s) for s in self.subsets))
            if any(s < 1 for s in self.subsets) or sum(self.subsets) != self.size:
                raise ValueError(
                    f"nested set {self.name!r}: sub-set sizes {self.subsets} must be positive "
                    f"and sum to {self.size}"
                )

    @property
    def kind(self) -> str:
        return "independent" if self.subsets is None else "nested"

    def block_bounds(self) -> list[tuple[int, int]]:
        sizes = self.subsets or (self.size,)
        ends = np.cumsum(sizes)
        return [(int(e - s), int(e)) for s, e in zip(sizes, ends)]

    def generators(self) -> list[np.ndarray]:
        """Permutations generating this set's own symmetry group."""
        gens = []
        for lo, hi in self.block_bounds():
            if hi - lo >= 2:
                swap = np.arange(self.size)
                swap[[lo, lo + 1]] = [lo + 1, lo]
                cyc = np.arange(self.size)
                cyc[lo:hi] = np.roll(cyc[lo:hi], 1)
                gens += [swap, cyc]
        if self.subsets is not None:
            for blocks in _equal_size_blocks(self).values():
                if len(blocks) < 2:
                    continue
                gens.append(_block_perm(self, blocks, [1, 0] + list(range(2, len(blocks)))))
                gens.append(_block_perm(self, blocks, list(np.roll(np.arange(len(blocks)), 1))))
        return gens

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        perm = np.arange(self.size)
        if self.subsets is not None:
            for blocks in _equal_size_blocks(self).values():
                perm = perm[_block_perm(self, blocks, rng.permutation(len(blocks)))]
        for lo, hi in self.block_bounds():
            perm[lo:hi] = perm[lo:hi][rng.permutation(hi - lo)]
        return perm


def _equal_size_blocks(s: SetSpec) -> dict[int, list[tuple[int, int]]]:
    groups: dict[int, list[tuple[int, int]]] = {}
    for lo, hi in s.block_bounds():
        groups.setdefault(hi - lo, []).append((lo, hi))
    return groups


def _block_perm(s: SetSpec, blocks, order) -> np.ndarray:
    # moves block order[j] into the slot of block j, keeping element order inside blocks
    perm = np.arange(s.size)
    for j, src in enumerate(order):
        lo, hi = blocks[j]
        slo, shi = blocks[src]
        perm[lo:hi] = np.arange(slo, shi)
    return perm


@dataclass(frozen=True)
class SetSignature:
    sets: tuple[SetSpec, ...]
    joint_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "joint_groups", tuple(tuple(g) for g in self.joint_groups))
        names = [s.name for s in self.sets]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate set names in {names}")
        seen: set[int] = set()
        for group in self.joint_groups:
            if len(group) < 2:
                raise ValueError("a joint group needs at least two sets")
            for i in group:
                if not 0 <= i < len(self.sets):
                    raise ValueError(f"joint group refers to unknown set {i}")
                if i in seen:
                    raise ValueError(f"set {i} appears in more than one joint group")
                seen.add(i)
            first = self.sets[group[0]]
            for i in group[1:]:
                other = self.sets[i]
                if other.size != first.size or other.subsets != first.subsets:
                    raise ValueError(
                        f"jointly permuted sets {first.name!r} and {other.name!r} differ in size/structure"
                    )

    @classmethod
    def independent(cls, **sizes: int) -> "SetSignature":
        return cls(tuple(SetSpec(name, n) for name, n in sizes.items()))

    def index(self, ref) -> int:
        if isinstance(ref, (int, np.integer)):
            if not 0 <= ref < len(self.sets):
                raise ValueError(f"no set with index {ref}")
            return int(ref)
        for i, s in enumerate(self.sets):
            if s.name == ref:
                return i
        raise ValueError(f"no set named {ref!r}")

    def extents(self, space: Sequence) -> tuple[int, ...]:
        return tuple(self.sets[self.index(r)].size for r in space)

    @property
    def is_independent(self) -> bool:
        return not self.joint_groups and all(s.subsets is None for s in self.sets)

    def _orbits_of_sets(self) -> list[tuple[int, ...]]:
        grouped = {i for g in self.joint_groups for i in g}
        return list(self.joint_groups) + [(i,) for i in range(len(self.sets)) if i not in grouped]

    def generators(self) -> list[dict[int, np.ndarray]]:
        """Group generators as maps set index -> permutation array."""
        gens = []
        for members in self._orbits_of_sets():
            for perm in self.sets[members[0]].generators():
                gens.append({i: perm for i in members})
        return gens

    def random_element(self, rng: np.random.Generator) -> dict[int, np.ndarray]:
        elem = {}
        for members in self._orbits_of_sets():
            perm = self.sets[members[0]].random_element(rng)
            for i in members:
                elem[i] = perm
        return elem

    def to_dict(self) -> dict:
        return {
            "sets": [
                {"name": s.name, "size": s.size, **({"subsets": list(s.subsets)} if s.subsets else {})}
                for s in self.sets
            ],
            "joint_groups": [list(g) for g in self.joint_groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SetSignature":
        sets = tuple(SetSpec(s["name"], int(s["size"]), s.get("subsets")) for s in d["sets"])
        return cls(sets, tuple(tuple(g) for g in d.get("joint_groups", ())))


@dataclass
class OrbitBasis:
    """Partition of the (out, in) index-pair table into orbits.

    ``labels[r, c]`` is the orbit id of pair ``(r, c)`` in vec coordinates and
    ``retained[o]`` says whether orbit ``o`` carries a trainable weight.
    """

    signature: SetSignature
    out_space: tuple[int, ...]
    in_space: tuple[int, ...]
    labels: np.ndarray
    retained: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.retained is None:
            self.retained = np.ones(self.n_orbits, dtype=bool)

    @property
    def out_dims(self) -> tuple[int, ...]:
        return self.signature.extents(self.out_space)

    @property
    def in_dims(self) -> tuple[int, ...]:
        return self.signature.extents(self.in_space)

    @property
    def n_orbits(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def retained_ids(self) -> np.ndarray:
        return np.flatnonzero(self.retained)

    @property
    def n_retained(self) -> int:
        return int(self.retained.sum())

    def orbit_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_orbits)

    def representatives(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Smallest member of each orbit as (out multi-index, in multi-index)."""
        flat = self.labels.ravel()
        first = np.full(self.n_orbits, flat.size)
        np.minimum.at(first, flat, np.arange(flat.size))
        n_in = self.labels.shape[1]
        reps = []
        for pos in first:
            r, c = divmod(int(pos), n_in)
            reps.append(
                (
                    tuple(int(i) for i in np.unravel_index(r, self.out_dims)) if self.out_dims else (),
                    tuple(int(i) for i in np.unravel_index(c, self.in_dims)) if self.in_dims else (),
                )
            )
        return reps

    def differing_axes(self, orbit: int) -> tuple[int, ...]:
        """Axes where a member's out and in indices differ (hyper-edge layers only)."""
        if self.out_space != self.in_space:
            raise ValueError("differing_axes needs identical input and output spaces")
        out_idx, in_idx = self.representatives()[orbit]
        return tuple(a for a, (i, j) in enumerate(zip(out_idx, in_idx)) if i != j)

    def indicators(self, retained_only: bool = True) -> np.ndarray:
        """Stack of 0/1 matrices, one per (retained) orbit."""
        ids = self.retained_ids if retained_only else np.arange(self.n_orbits)
        return (self.labels[None, :, :] == ids[:, None, None]).astype(float)

    def to_json(self) -> str:
        reps = self.representatives()
        sizes = self.orbit_sizes()
        return json.dumps(
            {
                "signature": self.signature.to_dict(),
                "out_space": [self.signature.sets[i].name for i in self.out_space],
                "in_space": [self.signature.sets[i].name for i in self.in_space],
                "n_orbits": self.n_orbits,
                "n_retained": self.n_retained,
                "orbits": [
                    {
                        "id": o,
                        "representative": {"out": list(reps[o][0]), "in": list(reps[o][1])},
                        "size": int(sizes[o]),
                        "retained": bool(self.retained[o]),
                    }
                    for o in range(self.n_orbits)
                ],
            },
            indent=2,
        )


def enumerate_orbits(sig: SetSignature, out_space: Sequence, in_space: Sequence) -> OrbitBasis:
    out_idx = tuple(sig.index(r) for r in out_space)
    in_idx = tuple(sig.index(r) for r in in_space)
    if not out_idx or not in_idx:
        raise ValueError("output and input spaces must each reference at least one set")
    coord_sets = out_idx + in_idx
    dims = sig.extents(coord_sets)
    n = int(np.prod(dims))
    coords = np.indices(dims).reshape(len(dims), n)

    rows, cols = [], []
    for gen in sig.generators():
        image = np.stack([gen[s][coords[a]] if s in gen else coords[a] for a, s in enumerate(coord_sets)])
        rows.append(np.arange(n))
        cols.append(np.ravel_multi_index(image, dims))
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.arange(n)
    graph = coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(n, n))
    _, comp = connected_components(graph, directed=True, connection="weak")

    # canonical ids: order components by smallest member
    first = np.full(comp.max() + 1, n)
    np.minimum.at(first, comp, np.arange(n))
    rank = np.empty_like(first)
    rank[np.argsort(first)] = np.arange(first.size)
    labels = rank[comp].reshape(int(np.prod(sig.extents(out_idx))), int(np.prod(sig.extents(in_idx))))
    return OrbitBasis(sig, out_idx, in_idx, labels)


def adjacency_mask(basis: OrbitBasis) -> OrbitBasis:
    """Keep only orbits whose pairs differ in at most one set coordinate."""
    if basis.out_space != basis.in_space:
        raise ValueError("adjacency masking needs input and output spaces over the same sets")
    keep = np.array([len(basis.differing_axes(o)) <= 1 for o in range(basis.n_orbits)])
    return OrbitBasis(basis.signature, basis.out_space, basis.in_space, basis.labels, basis.retained & keep)


def materialize_operator(basis: OrbitBasis, weights) -> np.ndarray:
    w = np.asarray(weights)
    if w.shape != (basis.n_retained,):
        raise ValueError(f"expected {basis.n_retained} weights, got shape {w.shape}")
    table = np.zeros(basis.n_orbits, dtype=np.result_type(w, float))
    table[basis.retained_ids] = w
    return table[basis.labels]


def commutation_error(
    P: np.ndarray,
    sig: SetSignature,
    out_space: Sequence,
    in_space: Sequence,
    trials: int = 100,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest |(A_out P - P A_in)| over the identity and ``trials`` random group elements."""
    rng = np.random.default_rng(0) if rng is None else rng
    out_idx = [sig.index(r) for r in out_space]
    in_idx = [sig.index(r) for r in in_space]
    out_dims, in_dims = sig.extents(out_idx), sig.extents(in_idx)
    P = np.asarray(P)
    if P.shape != (int(np.prod(out_dims)), int(np.prod(in_dims))):
        raise ValueError(f"operator shape {P.shape} does not match spaces {out_dims} -> {in_dims}")
    worst = 0.0
    elements = [{i: np.arange(s.size) for i, s in enumerate(sig.sets)}]
    elements += [sig.random_element(rng) for _ in range(trials)]
    for g in elements:
        s_out = vec_permutation(out_dims, [g[i] for i in out_idx])
        s_in = vec_permutation(in_dims, [g[i] for i in in_idx])
        worst = max(worst, float(np.max(np.abs(P[np.ix_(s_out, s_in)] - P))))
    return worst


def check_commutation(P, sig, out_space, in_space, trials: int = 100, rng=None, atol: float = 0.0) -> bool:
    return commutation_error(P, sig, out_space, in_space, trials, rng) <= atol
