"""Channel generators: i.i.d. Rayleigh, narrowband Saleh-Valenzuela with a
uniform linear array, and a wideband tap-delay model mapped to subcarriers.

Every generator takes ``n_samples``; ``None`` returns a single ``(K, N_t)``
(or ``(M, K, N_t)``) draw, an integer prepends a sample axis. Results depend
only on ``seed`` and the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SVParams:
    N_cl: int = 4
    N_ray: int = 5
    angular_spread_deg: float = 10.0
    d_over_lambda: float = 0.5

    def __post_init__(self):
        if self.N_cl < 1 or self.N_ray < 1:
            raise ValueError("N_cl and N_ray must be >= 1")
        if self.angular_spread_deg < 0:
            raise ValueError("angular spread must be nonnegative")


@dataclass(frozen=True)
class WidebandParams:
    M: int = 8
    D: int = 4
    rolloff: float = 0.3

    def __post_init__(self):
        if self.M < 1 or self.D < 1:
            raise ValueError("M and D must be >= 1")
        if not 0 <= self.rolloff <= 1:
            raise ValueError("roll-off must lie in [0, 1]")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _cn(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def array_response(theta, N_t: int, d_over_lambda: float = 0.5) -> np.ndarray:
    """ULA response ``f(theta)``; a trailing ``N_t`` axis is appended to ``theta``'s shape."""
    if N_t < 1:
        raise ValueError("N_t must be >= 1")
    theta = np.asarray(theta, dtype=float)
    n = np.arange(N_t)
    return np.exp(2j * np.pi * d_over_lambda * np.sin(theta)[..., None] * n) / np.sqrt(N_t)


def sv_channel(alpha, theta, N_t: int, d_over_lambda: float = 0.5) -> np.ndarray:
    """``sqrt(N_t / L) * sum_l alpha_l f(theta_l)`` over the trailing ray axis of length L."""
    alpha = np.asarray(alpha, dtype=complex)
    L = alpha.shape[-1]
    f = array_response(theta, N_t, d_over_lambda)
    return np.sqrt(N_t / L) * np.einsum("...l,...ln->...n", alpha, f)


def _sv_rays(rng, shape, p: SVParams):
    centers = rng.uniform(0, 2 * np.pi, shape + (p.N_cl, 1))
    half = np.deg2rad(p.angular_spread_deg) / 2
    theta = centers + rng.uniform(-half, half, shape + (p.N_cl, p.N_ray))
    alpha = _cn(rng, shape + (p.N_cl, p.N_ray))
    L = p.N_cl * p.N_ray
    return alpha.reshape(shape + (L,)), theta.reshape(shape + (L,))


def gen_sv_narrowband(K: int, N_t: int, params: SVParams | None = None, seed=0, n_samples: int | None = None):
    p = params or SVParams()
    rng = _rng(seed)
    shape = (K,) if n_samples is None else (n_samples, K)
    alpha, theta = _sv_rays(rng, shape, p)
    return sv_channel(alpha, theta, N_t, p.d_over_lambda)


def gen_rayleigh_iid(K: int, N_t: int, seed=0, n_samples: int | None = None) -> np.ndarray:
    shape = (K, N_t) if n_samples is None else (n_samples, K, N_t)
    return _cn(_rng(seed), shape)


def gen_pc_gains(K: int, seed=0, n_samples: int | None = None) -> np.ndarray:
    """Squared magnitudes of i.i.d. Rayleigh links: ``G[k, i] = |h_{k,i}|^2``."""
    return np.abs(gen_rayleigh_iid(K, K, seed, n_samples)) ** 2


def raised_cosine(t, rolloff: float = 0.3) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if rolloff == 0:
        return np.sinc(t)
    edge = np.isclose(np.abs(t), 1 / (2 * rolloff))
    denom = np.where(edge, 1.0, 1 - (2 * rolloff * t) ** 2)
    return np.where(edge, np.pi / 4 * np.sinc(1 / (2 * rolloff)), np.sinc(t) * np.cos(np.pi * rolloff * t) / denom)


def taps_to_subcarriers(taps: np.ndarray, M: int) -> np.ndarray:
    """``h^m = sum_d taps[d] exp(-j 2 pi m d / M)``; taps on axis 0 of shape ``(D, ...)``."""
    taps = np.asarray(taps)
    D = taps.shape[0]
    phase = np.exp(-2j * np.pi * np.outer(np.arange(M), np.arange(D)) / M)
    return np.tensordot(phase, taps, axes=(1, 0))


def _pulse_taps(tau, wb: WidebandParams) -> np.ndarray:
    """Sampled pulse per ray, shape ``tau.shape + (D,)``, scaled to unit mean subcarrier gain."""
    d = np.arange(wb.D)
    p = raised_cosine(d - tau[..., None], wb.rolloff)
    spectrum = taps_to_subcarriers(np.moveaxis(p, -1, 0), wb.M)
    gain = np.sqrt(np.mean(np.abs(spectrum) ** 2, axis=0))
    return p / np.maximum(gain, 1e-12)[..., None]


def gen_wideband(K: int, N_t: int, sv: SVParams | None = None, wb: WidebandParams | None = None, seed=0,
                 n_samples: int | None = None) -> np.ndarray:
    """Wideband channels ``(M, K, N_t)`` (sample axis first when ``n_samples`` is set)."""
    sv = sv or SVParams()
    wb = wb or WidebandParams()
    rng = _rng(seed)
    shape = (K,) if n_samples is None else (n_samples, K)
    alpha, theta = _sv_rays(rng, shape, sv)
    tau = rng.uniform(0, wb.D, alpha.shape)
    pulse = _pulse_taps(tau, wb)  # (..., L, D)
    L = alpha.shape[-1]
    f = array_response(theta, N_t, sv.d_over_lambda)  # (..., L, N_t)
    taps = np.sqrt(N_t / L) * np.einsum("...l,...ld,...ln->d...n", alpha, pulse, f)  # (D, ..., K, N_t)
    H = taps_to_subcarriers(taps, wb.M)  # (M, ..., K, N_t)
    return H if n_samples is None else np.moveaxis(H, 0, 1)


GENERATORS = {"rayleigh", "sv", "wideband", "pc_gains"}


def generate(kind: str, K: int, N_t: int = 1, n_samples: int | None = None, seed=0,
             sv: SVParams | None = None, wb: WidebandParams | None = None) -> np.ndarray:
    if kind == "rayleigh":
        return gen_rayleigh_iid(K, N_t, seed, n_samples)
    if kind == "sv":
        return gen_sv_narrowband(K, N_t, sv, seed, n_samples)
    if kind == "wideband":
        return gen_wideband(K, N_t, sv, wb, seed, n_samples)
    if kind == "pc_gains":
        return gen_pc_gains(K, seed, n_samples)
    raise ValueError(f"unknown channel kind {kind!r}; expected one of {sorted(GENERATORS)}")
