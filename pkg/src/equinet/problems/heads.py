"""End-to-end learners: input lift, equivariant update stack, output reduce + projection.

Every head exposes the same small surface used by training and evaluation:

* ``parameters()`` / ``buffers()`` / ``set_training(flag)``
* ``objective(batch)`` -> per-sample objective as a differentiable ``Var``
* ``predict(batch)`` -> numpy solution (complex precoders or powers)

A batch is a dict of arrays with a leading sample axis. Hybrid and MISO heads
read ``H`` (complex) and optionally ``beta`` and ``P_tot``; the power-control
head reads ``G``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from equinet import autodiff as ad
from equinet.autodiff import Var
from equinet.equivariance import SetSignature, SetSpec, enumerate_orbits
from equinet.nn import GNN, EquivariantLinear
from equinet.problems import objectives as obj


def input_lift(features, extents: Sequence[int], virtual=None) -> np.ndarray:
    """Copy each feature along the set axes it lacks, one channel per feature.

    ``features`` is a list of ``(array, axes)`` where ``array`` has shape
    ``(batch, *[extents[a] for a in axes])``. ``virtual=(a, axis, channel)``
    adds vector ``a`` along ``axis`` onto ``channel``.
    """
    extents = tuple(extents)
    channels = []
    batch = None
    for arr, axes in features:
        arr = np.asarray(arr)
        axes = tuple(axes)
        if any(not 0 <= a < len(extents) for a in axes):
            raise ValueError(f"feature axes {axes} not among the {len(extents)} set axes")
        expected = tuple(extents[a] for a in axes)
        if arr.shape[1:] != expected:
            raise ValueError(f"feature shape {arr.shape[1:]} does not match extents {expected}")
        batch = arr.shape[0]
        shape = [batch] + [extents[a] if a in axes else 1 for a in range(len(extents))]
        # axes must be listed in increasing order for the reshape to place them
        order = np.argsort(axes)
        arr = np.transpose(arr, [0] + [1 + int(i) for i in order]) if len(axes) > 1 else arr
        channels.append(np.broadcast_to(arr.reshape(shape), (batch,) + extents))
    X = np.stack(channels, axis=1)
    if virtual is not None:
        a, axis, ch = virtual
        shape = [1] * len(extents)
        shape[axis] = -1
        X = X.copy()
        X[:, ch] += np.asarray(a).reshape(shape)
    return X


def virtual_feature(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / n


@dataclass
class ModelSpec:
    problem: str
    K: int = 2
    N_t: int = 4
    N_s: int = 2
    M: int = 1
    hidden: list[int] = field(default_factory=lambda: [32, 32, 32])
    norm: bool = False
    P_tot: float = 1.0
    sigma2: float = 0.1
    antenna_subsets: list[int] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class _Head:
    gnn: GNN

    def parameters(self) -> list[Var]:
        return self.gnn.parameters()

    def buffers(self) -> list[np.ndarray]:
        return self.gnn.buffers()

    def load_buffers(self, arrays) -> None:
        self.gnn.load_buffers(arrays)

    def set_training(self, flag: bool) -> None:
        self.gnn.set_training(flag)

    @property
    def n_weights(self) -> int:
        return sum(int(p.data.size) for p in self.parameters())

    def predict(self, batch: dict):
        with ad.no_grad():
            return self._predict(batch)


class _HybridHead(_Head):
    """Shared projection/objective for narrowband hybrid precoding learners."""

    def __init__(self, spec: ModelSpec, dtype):
        self.spec = spec
        self.dtype = dtype

    def _inputs(self, batch):
        H = np.asarray(batch["H"])
        B = H.shape[0]
        beta = np.asarray(batch.get("beta", np.ones((B, H.shape[-2]))), dtype=float)
        P = np.broadcast_to(np.asarray(batch.get("P_tot", self.spec.P_tot), dtype=float), (B,))
        return H, beta, P

    def solution_vars(self, batch):
        H, beta, P = self._inputs(batch)
        rf, bb = self._raw(H, beta, P)
        rf = ad.unit_phase(*rf)
        bb = obj.project_power_var(rf, bb, P)
        return rf, bb

    def objective(self, batch) -> Var:
        H, beta, _ = self._inputs(batch)
        rf, bb = self.solution_vars(batch)
        return obj.sum_rate_var(H, obj.cmatmul(rf, bb), self.spec.sigma2, beta)

    def _predict(self, batch):
        rf, bb = self.solution_vars(batch)
        W_RF = rf[0].data.astype(float) + 1j * rf[1].data.astype(float)
        W_BB = bb[0].data.astype(float) + 1j * bb[1].data.astype(float)
        # unit modulus and power re-imposed in float64 on the emitted solution
        W_RF = obj.project_constant_modulus(W_RF)
        W_BB = obj.project_power(W_RF, W_BB, self._inputs(batch)[2])
        return obj.HybridSolution(W_RF, W_BB)

    def _lift_common(self, H, beta, P, extents, virtual=None):
        feats = [(H.real, (0, 1)), (H.imag, (0, 1)), (beta, (0,)), (P, ())]
        return input_lift(feats, extents, virtual).astype(self.dtype)


class HybridHead3D(_HybridHead):
    """Users x antennas x RF chains hyper-edge learner with a virtual RF feature."""

    def __init__(self, spec: ModelSpec, rng=None, dtype=np.float64):
        super().__init__(spec, dtype)
        self.signature = SetSignature.independent(users=spec.K, antennas=spec.N_t, rf=spec.N_s)
        self.a = virtual_feature(spec.N_s)
        self.gnn = GNN(self.signature, [4, *spec.hidden, 4], norm=spec.norm, rng=rng, dtype=dtype)

    def lift(self, H, beta, P, a=None):
        a = self.a if a is None else a
        s = self.spec
        return self._lift_common(H, beta, P, (s.K, s.N_t, s.N_s), (a, 2, 0))

    def _raw(self, H, beta, P, a=None):
        X = self.gnn(Var(self.lift(H, beta, P, a)))
        rf = (X[:, 0].mean(axis=1), X[:, 1].mean(axis=1))  # average over users
        bb = (X[:, 2].mean(axis=2).swapaxes(1, 2), X[:, 3].mean(axis=2).swapaxes(1, 2))  # over antennas
        return rf, bb

    def predict_with_virtual(self, batch, a):
        """Solution produced when the virtual RF-chain feature is replaced by ``a``."""
        saved = self.a
        self.a = np.asarray(a)
        try:
            return self.predict(batch)
        finally:
            self.a = saved


class HybridHead2D(_HybridHead):
    """Reduced learner ignoring the RF-chain set: 4*N_s output channels."""

    def __init__(self, spec: ModelSpec, rng=None, dtype=np.float64):
        super().__init__(spec, dtype)
        self.signature = SetSignature.independent(users=spec.K, antennas=spec.N_t)
        self.gnn = GNN(self.signature, [4, *spec.hidden, 4 * spec.N_s], norm=spec.norm, rng=rng, dtype=dtype)

    def _raw(self, H, beta, P):
        n = self.spec.N_s
        X = self.gnn(Var(self._lift_common(H, beta, P, (self.spec.K, self.spec.N_t))))
        rf = tuple(X[:, i * n : (i + 1) * n].mean(axis=2).swapaxes(1, 2) for i in (0, 1))
        bb = tuple(X[:, i * n : (i + 1) * n].mean(axis=3) for i in (2, 3))
        return rf, bb


class HybridHead1D(_HybridHead):
    """Reduced learner over the antenna set only; users become channels."""

    def __init__(self, spec: ModelSpec, rng=None, dtype=np.float64):
        super().__init__(spec, dtype)
        K, n = spec.K, spec.N_s
        self.signature = SetSignature.independent(antennas=spec.N_t)
        self.gnn = GNN(self.signature, [3 * K + 1, *spec.hidden, 2 * n + 2 * n * K], norm=spec.norm, rng=rng, dtype=dtype)

    def _raw(self, H, beta, P):
        K, n = self.spec.K, self.spec.N_s
        B = H.shape[0]
        feats = [(H.real[:, k], (0,)) for k in range(K)] + [(H.imag[:, k], (0,)) for k in range(K)]
        feats += [(beta[:, k], ()) for k in range(K)] + [(P, ())]
        X = self.gnn(Var(input_lift(feats, (self.spec.N_t,)).astype(self.dtype)))
        rf = (X[:, :n].swapaxes(1, 2), X[:, n : 2 * n].swapaxes(1, 2))
        lo = 2 * n
        bb = tuple(X[:, lo + i * n * K : lo + (i + 1) * n * K].mean(axis=2).reshape(B, n, K) for i in (0, 1))
        return rf, bb


class MisoHead2D(_Head):
    """Fully digital MU-MISO precoding (users x antennas, optionally nested antennas)."""

    def __init__(self, spec: ModelSpec, rng=None, dtype=np.float64):
        self.spec = spec
        self.dtype = dtype
        ant = SetSpec("antennas", spec.N_t, tuple(spec.antenna_subsets) if spec.antenna_subsets else None)
        self.signature = SetSignature((SetSpec("users", spec.K), ant))
        self.gnn = GNN(self.signature, [2, *spec.hidden, 2], norm=spec.norm, rng=rng, dtype=dtype)

    def solution_vars(self, batch):
        H = np.asarray(batch["H"])
        B = H.shape[0]
        P = np.broadcast_to(np.asarray(batch.get("P_tot", self.spec.P_tot), dtype=float), (B,))
        X = self.gnn(Var(np.stack([H.real, H.imag], axis=1).astype(self.dtype)))
        W = (X[:, 0].swapaxes(1, 2), X[:, 1].swapaxes(1, 2))
        return obj.project_power_var(None, W, P)

    def objective(self, batch) -> Var:
        return obj.sum_rate_var(np.asarray(batch["H"]), self.solution_vars(batch), self.spec.sigma2, batch.get("beta"))

    def _predict(self, batch):
        W = self.solution_vars(batch)
        W = W[0].data.astype(float) + 1j * W[1].data.astype(float)
        P = np.broadcast_to(np.asarray(batch.get("P_tot", self.spec.P_tot), dtype=float), (W.shape[0],))
        return obj.normalize_digital(W, P)


class WidebandHead4D(_Head):
    """Subcarriers x users x antennas x RF chains learner with a shared analog precoder."""

    def __init__(self, spec: ModelSpec, rng=None, dtype=np.float64):
        self.spec = spec
        self.dtype = dtype
        self.signature = SetSignature.independent(subcarriers=spec.M, users=spec.K, antennas=spec.N_t, rf=spec.N_s)
        self.a = virtual_feature(spec.N_s)
        self.gnn = GNN(self.signature, [4, *spec.hidden, 4], norm=spec.norm, rng=rng, dtype=dtype)

    def _inputs(self, batch):
        H = np.asarray(batch["H"])  # (B, M, K, N_t)
        B = H.shape[0]
        beta = np.asarray(batch.get("beta", np.ones((B, H.shape[-2]))), dtype=float)
        P = np.broadcast_to(np.asarray(batch.get("P_tot", self.spec.P_tot), dtype=float), (B,))
        return H, beta, P

    def solution_vars(self, batch):
        H, beta, P = self._inputs(batch)
        s = self.spec
        feats = [(H.real, (0, 1, 2)), (H.imag, (0, 1, 2)), (beta, (1,)), (P, ())]
        X1 = input_lift(feats, (s.M, s.K, s.N_t, s.N_s), (self.a, 3, 0)).astype(self.dtype)
        X = self.gnn(Var(X1))
        rf = ad.unit_phase(X[:, 0].mean(axis=(1, 2)), X[:, 1].mean(axis=(1, 2)))  # over subcarriers and users
        bb = (X[:, 2].mean(axis=3).swapaxes(2, 3), X[:, 3].mean(axis=3).swapaxes(2, 3))  # over antennas
        B = H.shape[0]
        rf4 = (rf[0].reshape(B, 1, s.N_t, s.N_s), rf[1].reshape(B, 1, s.N_t, s.N_s))
        bb = obj.project_power_var(rf4, bb, P)
        return rf, bb

    def objective(self, batch) -> Var:
        H, beta, _ = self._inputs(batch)
        rf, bb = self.solution_vars(batch)
        B, s = H.shape[0], self.spec
        rf4 = (rf[0].reshape(B, 1, s.N_t, s.N_s), rf[1].reshape(B, 1, s.N_t, s.N_s))
        W = obj.cmatmul(rf4, bb)
        return obj.sum_rate_var(H, W, s.sigma2, beta[:, None, :]).mean(axis=1)

    def _predict(self, batch):
        rf, bb = self.solution_vars(batch)
        W_RF = obj.project_constant_modulus(rf[0].data.astype(float) + 1j * rf[1].data.astype(float))
        W_BB = bb[0].data.astype(float) + 1j * bb[1].data.astype(float)
        W_BB = obj.project_power(W_RF, W_BB, self._inputs(batch)[2])
        return obj.WidebandSolution(W_RF, W_BB)


class PowerControlHead(_Head):
    """Jointly permuted transmitter/receiver learner with a 5-orbit output map."""

    def __init__(self, spec: ModelSpec, rng=None, dtype=np.float64):
        self.spec = spec
        self.dtype = dtype
        rng = np.random.default_rng(0) if rng is None else rng
        K = spec.K
        self.signature = SetSignature((SetSpec("rx", K), SetSpec("tx", K)), ((0, 1),))
        self.gnn = GNN(self.signature, [1, *spec.hidden], norm=spec.norm, final_activation=True, rng=rng, dtype=dtype)
        self.out_basis = enumerate_orbits(self.signature, ["tx"], ["rx", "tx"])
        self.out = EquivariantLinear(self.out_basis, spec.hidden[-1], 1, rng, dtype)

    @property
    def P_M(self) -> float:
        return self.spec.P_tot

    def parameters(self) -> list[Var]:
        return self.gnn.parameters() + self.out.parameters()

    def powers_var(self, batch) -> Var:
        G = np.asarray(batch["G"], dtype=self.dtype)
        X = self.gnn(Var(G[:, None]))
        return ad.sigmoid(self.out(X)[:, 0]) * self.P_M

    def objective(self, batch) -> Var:
        return obj.pc_rate_var(np.asarray(batch["G"]), self.powers_var(batch), self.spec.sigma2)

    def _predict(self, batch):
        return np.clip(self.powers_var(batch).data.astype(float), 0.0, self.P_M)


HEADS = {
    "hybrid3d": HybridHead3D,
    "hybrid2d": HybridHead2D,
    "hybrid1d": HybridHead1D,
    "miso2d": MisoHead2D,
    "wideband4d": WidebandHead4D,
    "power": PowerControlHead,
}


def build_head(spec: ModelSpec, seed: int = 0, dtype=np.float64):
    if spec.problem not in HEADS:
        raise ValueError(f"unknown problem {spec.problem!r}; expected one of {sorted(HEADS)}")
    rng = np.random.default_rng([seed, 0])
    return HEADS[spec.problem](spec, rng=rng, dtype=dtype)


def head_hybrid_3d(spec: ModelSpec, seed: int = 0, dtype=np.float64) -> HybridHead3D:
    return build_head(ModelSpec(**{**spec.to_dict(), "problem": "hybrid3d"}), seed, dtype)


def head_wideband_4d(spec: ModelSpec, seed: int = 0, dtype=np.float64) -> WidebandHead4D:
    return build_head(ModelSpec(**{**spec.to_dict(), "problem": "wideband4d"}), seed, dtype)


def head_miso_2d(spec: ModelSpec, seed: int = 0, dtype=np.float64) -> MisoHead2D:
    return build_head(ModelSpec(**{**spec.to_dict(), "problem": "miso2d"}), seed, dtype)


def head_pc_joint2d(spec: ModelSpec, seed: int = 0, dtype=np.float64) -> PowerControlHead:
    return build_head(ModelSpec(**{**spec.to_dict(), "problem": "power"}), seed, dtype)
