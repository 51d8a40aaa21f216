"""Equivariant hyper-edge layers and the multidimensional GNN stack.

Hidden states are arrays of shape ``(batch, channels, *set_extents)``. An
:class:`EquivariantLinear` holds one weight per retained orbit for every
(output channel, input channel) pair plus a per-output-channel bias.

For independent sets with adjacency masking each retained orbit is either
"self" or "differs along one axis", and the layer is evaluated with per-axis
sums instead of the dense operator:
``w_self*x + sum_d w_d*(S_d - x) = (w_self - sum_d w_d)*x + sum_d w_d*S_d``.
Any other basis (joint, nested, unmasked, or maps between different spaces)
goes through the dense orbit indicators.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from equinet import autodiff as ad
from equinet.autodiff import Var
from equinet.equivariance import OrbitBasis, SetSignature, adjacency_mask, enumerate_orbits


def hyperedge_basis(sig: SetSignature, masked: bool = True) -> OrbitBasis:
    space = list(range(len(sig.sets)))
    basis = enumerate_orbits(sig, space, space)
    return adjacency_mask(basis) if masked else basis


class EquivariantLinear:
    def __init__(
        self,
        basis: OrbitBasis,
        c_in: int,
        c_out: int,
        rng: np.random.Generator | None = None,
        dtype=np.float64,
        bias: bool = True,
    ):
        self.basis = basis
        self.c_in, self.c_out = c_in, c_out
        rng = np.random.default_rng(0) if rng is None else rng
        n_orb = basis.n_retained
        # an orbit feeding each output from `fan` inputs starts 1/fan smaller, so
        # pooled terms do not swamp the per-element term at initialization
        ind = basis.indicators()
        fan = ind.sum(axis=(1, 2)) / ind.shape[1]
        bound = np.sqrt(1.0 / (c_in * n_orb)) / fan
        self.weight = ad.parameter((rng.uniform(-1, 1, (n_orb, c_out, c_in)) * bound[:, None, None]).astype(dtype))
        self.bias = ad.parameter(np.zeros(c_out, dtype=dtype)) if bias else None
        self._axes = self._fast_axes()
        if self._axes is None:  # ind: (R, n_out, n_in)
            # (n_in, R * n_out) so one matmul aggregates every orbit at once
            self._stacked = np.ascontiguousarray(ind.transpose(2, 0, 1).reshape(ind.shape[2], -1)).astype(dtype)

    def _fast_axes(self):
        b = self.basis
        if not b.signature.is_independent or b.out_space != b.in_space:
            return None
        axes = []
        for o in b.retained_ids:
            diff = b.differing_axes(o)
            if len(diff) > 1:
                return None
            axes.append(diff[0] if diff else None)
        return axes

    def parameters(self) -> list[Var]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    @property
    def n_weights(self) -> int:
        return int(self.weight.data.size)

    def __call__(self, x: Var) -> Var:
        x = ad.as_var(x)
        batch = x.shape[0]
        if self._axes is not None:
            out = self._forward_sums(x)
        else:
            n_in = int(np.prod(self.basis.in_dims))
            n_out = int(np.prod(self.basis.out_dims))
            R = self.basis.n_retained
            agg = x.reshape(batch, self.c_in, n_in) @ self._stacked  # (B, c_in, R*n_out)
            agg = agg.reshape(batch, self.c_in, R, n_out).transpose(0, 2, 1, 3).reshape(batch, R * self.c_in, n_out)
            w = self.weight.transpose(1, 0, 2).reshape(self.c_out, R * self.c_in)
            out = ad.channel_mix(w, agg).reshape((batch, self.c_out) + self.basis.out_dims)
        if self.bias is not None:
            out = out + self.bias.reshape((1, self.c_out) + (1,) * len(self.basis.out_dims))
        return out

    def _forward_sums(self, x: Var) -> Var:
        self_idx = self._axes.index(None)
        neigh = [(i, a) for i, a in enumerate(self._axes) if a is not None]
        w_self = self.weight[self_idx]
        for i, _ in neigh:
            w_self = w_self - self.weight[i]
        out = ad.channel_mix(w_self, x)
        for i, a in neigh:
            out = out + ad.channel_mix(self.weight[i], x.sum(axis=2 + a, keepdims=True))
        return out

    def dense(self) -> np.ndarray:
        """Full operator on vec(x) with channel as the slowest index (no bias)."""
        ind = self.basis.indicators()
        w = self.weight.data
        n_out, n_in = ind.shape[1:]
        return np.einsum("roc,rij->oicj", w, ind).reshape(self.c_out * n_out, self.c_in * n_in)


class EquivariantNorm:
    """Per-channel standardization pooled over the batch and every set axis."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1, dtype=np.float64):
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.training = True

    def __call__(self, x: Var) -> Var:
        axes = (0,) + tuple(range(2, x.ndim))
        bshape = (1, -1) + (1,) * (x.ndim - 2)
        if self.training:
            mu = x.mean(axis=axes, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=axes, keepdims=True)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data.reshape(-1)
            self.running_var = (1 - m) * self.running_var + m * var.data.reshape(-1)
            return centered / ad.sqrt(var + self.eps)
        mean = self.running_mean.reshape(bshape).astype(x.data.dtype)
        std = np.sqrt(self.running_var + self.eps).reshape(bshape).astype(x.data.dtype)
        return (x - mean) / std


class GNN:
    """Stack of equivariant update layers; ReLU (and optional norm) between them.

    The last layer is linear so it can feed an averaging or projection head.
    """

    def __init__(
        self,
        signature: SetSignature,
        channels: Sequence[int],
        *,
        norm: bool = False,
        final_activation: bool = False,
        rng: np.random.Generator | None = None,
        dtype=np.float64,
    ):
        if len(channels) < 2:
            raise ValueError("need at least input and output channel counts")
        self.signature = signature
        self.channels = list(channels)
        self.basis = hyperedge_basis(signature)
        self.final_activation = final_activation
        rng = np.random.default_rng(0) if rng is None else rng
        self.layers = [
            EquivariantLinear(self.basis, ci, co, rng, dtype) for ci, co in zip(channels[:-1], channels[1:])
        ]
        n_act = len(self.layers) if final_activation else len(self.layers) - 1
        self.norms = [EquivariantNorm(c, dtype=dtype) if norm else None for c in channels[1 : 1 + n_act]]

    def parameters(self) -> list[Var]:
        return [p for layer in self.layers for p in layer.parameters()]

    def set_training(self, flag: bool) -> None:
        for n in self.norms:
            if n is not None:
                n.training = flag

    def __call__(self, x: Var) -> Var:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.norms):
                if self.norms[i] is not None:
                    x = self.norms[i](x)
                x = ad.relu(x)
        return x

    def buffers(self) -> list[np.ndarray]:
        out = []
        for n in self.norms:
            if n is not None:
                out += [n.running_mean, n.running_var]
        return out

    def load_buffers(self, arrays: Sequence[np.ndarray]) -> None:
        it = iter(arrays)
        for n in self.norms:
            if n is not None:
                n.running_mean = np.asarray(next(it))
                n.running_var = np.asarray(next(it))
