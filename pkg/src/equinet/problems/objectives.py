"""Problem instances, SINR / sum-rate objectives and constraint projections.

Two routes are kept side by side. The plain numpy functions work on complex
arrays and are the reference used by baselines and evaluation. The ``*_var``
functions work on (real, imaginary) pairs of :class:`~equinet.autodiff.Var`
so they can be differentiated; tests check both agree.

Channel convention: ``H`` has shape ``(K, N_t)`` and row ``k`` is ``h_k``, so
the gain of user ``k`` through precoder column ``w`` is ``conj(H[k]) @ w``.
Every function also accepts a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from equinet import autodiff as ad
from equinet.autodiff import Var


class DegenerateInputError(ValueError):
    pass


@dataclass
class HybridInstance:
    H: np.ndarray
    beta: np.ndarray | None = None
    P_tot: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        if self.beta is None:
            self.beta = np.ones(self.H.shape[-2])
        self.beta = np.asarray(self.beta, dtype=float)
        if np.any(self.beta < 0) or self.P_tot <= 0 or self.sigma2 <= 0:
            raise ValueError("need beta >= 0, P_tot > 0 and sigma2 > 0")

    @property
    def K(self) -> int:
        return self.H.shape[-2]

    @property
    def N_t(self) -> int:
        return self.H.shape[-1]


@dataclass
class HybridSolution:
    W_RF: np.ndarray
    W_BB: np.ndarray

    def power(self) -> np.ndarray:
        return np.sum(np.abs(self.W_RF @ self.W_BB) ** 2, axis=(-2, -1))


@dataclass
class WidebandInstance:
    H: np.ndarray  # (M, K, N_t)
    P_tot: float = 1.0
    sigma2: float = 1.0
    beta: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        if self.beta is None:
            self.beta = np.ones(self.H.shape[-2])


@dataclass
class WidebandSolution:
    W_RF: np.ndarray  # (N_t, N_s)
    W_BB: np.ndarray  # (M, N_s, K)

    def power(self) -> np.ndarray:
        return np.sum(np.abs(self.W_RF[..., None, :, :] @ self.W_BB) ** 2, axis=(-3, -2, -1))


@dataclass
class PowerControlInstance:
    G: np.ndarray  # G[k, i]: gain from transmitter i at receiver k
    P_M: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        if np.any(self.G < 0):
            raise ValueError("channel gains must be nonnegative")


# --- reference (complex numpy) ----------------------------------------------


def effective_gains(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``|conj(H) @ W|**2``: entry (k, i) is the power of stream i at user k."""
    return np.abs(np.conj(H) @ W) ** 2


def sinr_from_gains(gains: np.ndarray, sigma2) -> np.ndarray:
    signal = np.diagonal(gains, axis1=-2, axis2=-1)
    interference = gains.sum(axis=-1) - signal
    return signal / (interference + sigma2)


def sinr(H: np.ndarray, W: np.ndarray, sigma2) -> np.ndarray:
    """Per-user SINR for the overall precoder ``W`` (``N_t x K``)."""
    return sinr_from_gains(effective_gains(H, W), sigma2)


def sinr_k(inst: HybridInstance, sol: HybridSolution, k: int) -> float:
    if not 0 <= k < inst.K:
        raise IndexError(f"user {k} out of range")
    return float(sinr(inst.H, sol.W_RF @ sol.W_BB, inst.sigma2)[..., k])


def sum_rate(H, W, sigma2, beta=None) -> np.ndarray:
    g = sinr(H, W, sigma2)
    beta = np.ones(g.shape[-1]) if beta is None else np.asarray(beta)
    return np.sum(beta * np.log2(1.0 + g), axis=-1)


def weighted_sum_rate(inst: HybridInstance, sol: HybridSolution):
    return sum_rate(inst.H, sol.W_RF @ sol.W_BB, inst.sigma2, inst.beta)


def wideband_sum_rate(inst: WidebandInstance, sol: WidebandSolution):
    W = sol.W_RF[..., None, :, :] @ sol.W_BB  # (..., M, N_t, K)
    rates = sum_rate(inst.H, W, inst.sigma2, inst.beta)  # (..., M)
    return rates.mean(axis=-1)


def pc_sum_rate(inst: PowerControlInstance, p) -> np.ndarray:
    return pc_rate(inst.G, p, inst.sigma2)


def pc_rate(G, p, sigma2) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    p = np.asarray(p, dtype=float)
    received = G * p[..., None, :]
    signal = np.diagonal(received, axis1=-2, axis2=-1)
    interference = received.sum(axis=-1) - signal
    return np.sum(np.log2(1.0 + signal / (interference + sigma2)), axis=-1)


def project_constant_modulus(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=complex)
    mod = np.abs(W)
    # exact zeros get phase 0
    return np.where(mod == 0, 1.0 + 0j, W / np.where(mod == 0, 1.0, mod))


def project_power(W_RF: np.ndarray, W_BB: np.ndarray, P_tot) -> np.ndarray:
    """Scale ``W_BB`` so ``||W_RF W_BB||_F^2 == P_tot`` (sum over subcarriers if 3-D)."""
    W_BB = np.asarray(W_BB, dtype=complex)
    if W_BB.ndim == np.ndim(W_RF) + 1:  # wideband (..., M, N_s, K)
        T = np.asarray(W_RF)[..., None, :, :] @ W_BB
        norm2 = np.sum(np.abs(T) ** 2, axis=(-3, -2, -1))[..., None, None, None]
    else:
        T = np.asarray(W_RF) @ W_BB
        norm2 = np.sum(np.abs(T) ** 2, axis=(-2, -1))[..., None, None]
    if np.any(norm2 == 0):
        raise DegenerateInputError("W_RF @ W_BB is all zero; cannot scale to the power budget")
    P = np.asarray(P_tot, dtype=float).reshape(np.shape(P_tot) + (1,) * (norm2.ndim - np.ndim(P_tot)))
    return W_BB * np.sqrt(P / norm2)


def normalize_digital(W: np.ndarray, P_tot) -> np.ndarray:
    norm2 = np.sum(np.abs(W) ** 2, axis=(-2, -1), keepdims=True)
    if np.any(norm2 == 0):
        raise DegenerateInputError("all-zero precoder")
    return W * np.sqrt(np.asarray(P_tot, dtype=float).reshape(np.shape(P_tot) + (1, 1)) / norm2)


# --- differentiable (real pairs) --------------------------------------------

CVar = tuple[Var, Var]


def cmatmul(a: CVar, b: CVar) -> CVar:
    ar, ai = a
    br, bi = b
    return ar @ br - ai @ bi, ar @ bi + ai @ br


def frob2(z: CVar, axes=(-2, -1)) -> Var:
    zr, zi = z
    return (zr * zr + zi * zi).sum(axis=axes, keepdims=True)


def project_power_var(W_RF: CVar | None, W_BB: CVar, P_tot) -> CVar:
    """Differentiable power projection; ``W_RF=None`` means a digital precoder.

    For wideband ``W_BB`` of shape (B, M, N_s, K) pass ``W_RF`` as (B, 1, N_t, N_s).
    """
    T = W_BB if W_RF is None else cmatmul(W_RF, W_BB)
    ndim = W_BB[0].ndim
    P = np.asarray(P_tot, dtype=W_BB[0].data.dtype)
    P = P.reshape(P.shape + (1,) * (ndim - P.ndim))
    scale = ad.sqrt(P / frob2(T, tuple(range(1, ndim))))
    return W_BB[0] * scale, W_BB[1] * scale


def sum_rate_var(H: np.ndarray, W: CVar, sigma2, beta=None) -> Var:
    """Per-sample weighted sum-rate; ``H`` complex ``(..., K, N_t)``, ``W`` pair ``(..., N_t, K)``."""
    dtype = W[0].data.dtype
    Hr = np.ascontiguousarray(H.real, dtype=dtype)
    Hi = np.ascontiguousarray(H.imag, dtype=dtype)
    Wr, Wi = W
    Ar = Hr @ Wr + Hi @ Wi  # conj(H) @ W
    Ai = Hr @ Wi - Hi @ Wr
    gains = Ar * Ar + Ai * Ai
    K = gains.shape[-1]
    signal = (gains * np.eye(K, dtype=dtype)).sum(axis=-1)
    interference = gains.sum(axis=-1) - signal
    rates = ad.log2(1.0 + signal / (interference + sigma2))
    if beta is not None:
        rates = rates * np.asarray(beta, dtype=dtype)
    return rates.sum(axis=-1)


def pc_rate_var(G: np.ndarray, p: Var, sigma2) -> Var:
    G = np.asarray(G, dtype=p.data.dtype)
    K = G.shape[-1]
    received = p.reshape(p.shape[:-1] + (1, K)) * G
    signal = (received * np.eye(K, dtype=G.dtype)).sum(axis=-1)
    interference = received.sum(axis=-1) - signal
    return ad.log2(1.0 + signal / (interference + sigma2)).sum(axis=-1)
