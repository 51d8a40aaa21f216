"""Classical reference algorithms: MRT, ZF, WMMSE, a PEM-style hybrid precoder,
scalar WMMSE power control and a random-search oracle for tiny instances.

All precoding routines take ``H`` of shape ``(..., K, N_t)`` (row ``k`` is
``h_k``) and return ``N_t x K`` precoders meeting the total power budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from equinet.problems import objectives as obj


@dataclass
class BaselineReport:
    algorithm: str
    rates: np.ndarray
    iterations: int = 0
    wall_time: float = 0.0
    solution: object = field(default=None, repr=False)
    history: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rates))


def _equal_power_columns(V: np.ndarray, P_tot) -> np.ndarray:
    K = V.shape[-1]
    P = np.asarray(P_tot, dtype=float).reshape(np.shape(P_tot) + (1, 1))
    return V / np.linalg.norm(V, axis=-2, keepdims=True) * np.sqrt(P / K)


def mrt(H, P_tot, sigma2, beta=None) -> BaselineReport:
    H = np.asarray(H, dtype=complex)
    t0 = time.perf_counter()
    W = _equal_power_columns(np.swapaxes(H, -1, -2), P_tot)
    return BaselineReport("mrt", obj.sum_rate(H, W, sigma2, beta), 0, time.perf_counter() - t0, W)


def zf(H, P_tot, sigma2, beta=None, rcond: float = 1e-10) -> BaselineReport:
    """Zero-forcing: ``conj(H) @ W`` is diagonal; equal power per user."""
    H = np.asarray(H, dtype=complex)
    t0 = time.perf_counter()
    K, N_t = H.shape[-2:]
    if K > N_t:
        raise np.linalg.LinAlgError(f"zero forcing needs K <= N_t, got K={K}, N_t={N_t}")
    s = np.linalg.svd(H, compute_uv=False)
    if np.any(s[..., -1] <= rcond * s[..., 0]):
        raise np.linalg.LinAlgError("channel matrix is rank deficient; zero forcing undefined")
    Ht = np.swapaxes(H, -1, -2)
    V = Ht @ np.linalg.inv(np.conj(H) @ Ht)
    W = _equal_power_columns(V, P_tot)
    return BaselineReport("zf", obj.sum_rate(H, W, sigma2, beta), 0, time.perf_counter() - t0, W)


def _power_at(mu, lam, phi):
    return np.sum(phi / (lam + mu[..., None]) ** 2, axis=-1)


def _wmmse_v_update(H, U, Wt, beta, P, iters_bisect: int = 100):
    """Solve ``min_V sum_k beta_k w_k e_k`` s.t. ``||V||_F^2 <= P`` exactly (up to bisection)."""
    # A = sum_j beta_j w_j |u_j|^2 h_j h_j^H ; rhs column k = beta_k w_k u_k h_k
    coef = beta * Wt * np.abs(U) ** 2
    Ht = np.swapaxes(H, -1, -2)  # columns h_k
    A = (Ht * coef[..., None, :]) @ np.conj(H)
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    Bm = Ht * (beta * Wt * U)[..., None, :]
    lam, Q = np.linalg.eigh(A)
    lam = np.maximum(lam, 0.0)
    C = np.conj(np.swapaxes(Q, -1, -2)) @ Bm
    phi = np.sum(np.abs(C) ** 2, axis=-1)
    tiny = lam <= 1e-12 * np.max(lam, axis=-1, keepdims=True)
    phi = np.where(tiny, 0.0, phi)
    lam_safe = np.where(tiny, 1.0, lam)
    P = np.broadcast_to(np.asarray(P, dtype=float), lam.shape[:-1])
    mu = np.zeros(lam.shape[:-1])
    need = _power_at(mu, lam_safe, phi) > P
    if np.any(need):
        lo = np.zeros_like(mu)
        hi = np.sqrt(np.sum(phi, axis=-1) / P) + 1e-30  # power(hi) <= P since lam >= 0
        for _ in range(iters_bisect):
            mid = 0.5 * (lo + hi)
            over = _power_at(mid, lam_safe, phi) > P
            lo = np.where(over, mid, lo)
            hi = np.where(over, hi, mid)
        mu = np.where(need, hi, 0.0)
    inv = np.where(tiny, 0.0, 1.0 / (lam_safe + mu[..., None]))
    return Q @ (inv[..., None] * C)


def _wmmse_run(H, V, sigma2, beta, P, max_iters, tol):
    history = [obj.sum_rate(H, V, sigma2, beta)]
    it = 0
    for it in range(1, max_iters + 1):
        G = np.conj(H) @ V  # G[k, j] = h_k^H v_j
        d = np.diagonal(G, axis1=-2, axis2=-1)
        total = np.sum(np.abs(G) ** 2, axis=-1) + sigma2
        U = d / total
        e = 1.0 - np.abs(d) ** 2 / total
        Wt = 1.0 / np.maximum(e, 1e-300)
        V = _wmmse_v_update(H, U, Wt, beta, P)
        history.append(obj.sum_rate(H, V, sigma2, beta))
        if np.all(np.abs(history[-1] - history[-2]) <= tol * np.maximum(1.0, np.abs(history[-2]))):
            break
    return V, np.stack(history, axis=-1), it


def wmmse(H, P_tot, sigma2, beta=None, max_iters: int = 500, tol: float = 1e-8, init=None) -> BaselineReport:
    """Weighted MMSE sum-rate maximization for single-antenna users.

    Started from MRT and (when defined) ZF; the better end point is kept per
    sample and scaled to the full power budget. ``solution`` is the precoder
    and ``history`` the per-iteration sum-rate of the kept start.
    """
    H = np.asarray(H, dtype=complex)
    t0 = time.perf_counter()
    K, N_t = H.shape[-2:]
    beta = np.ones(K) if beta is None else np.asarray(beta, dtype=float)
    if init is not None:
        starts = [np.asarray(init, dtype=complex)]
    else:
        starts = [mrt(H, P_tot, sigma2).solution]
        if K <= N_t:
            try:
                starts.append(zf(H, P_tot, sigma2).solution)
            except np.linalg.LinAlgError:
                pass
    best_V, best_hist, iters = None, None, 0
    for V0 in starts:
        V, hist, it = _wmmse_run(H, V0, sigma2, beta, P_tot, max_iters, tol)
        iters = max(iters, it)
        if best_V is None:
            best_V, best_hist = V, hist
            continue
        better = hist[..., -1] > best_hist[..., -1]
        best_V = np.where(better[..., None, None], V, best_V)
        n = max(hist.shape[-1], best_hist.shape[-1])
        hist, best_hist = _pad_history(hist, n), _pad_history(best_hist, n)
        best_hist = np.where(better[..., None], hist, best_hist)
    W = obj.normalize_digital(best_V, np.broadcast_to(np.asarray(P_tot, dtype=float), best_V.shape[:-2]))
    rates = obj.sum_rate(H, W, sigma2, beta)
    return BaselineReport("wmmse", rates, iters, time.perf_counter() - t0, W, best_hist)


def _pad_history(h, n):
    if h.shape[-1] == n:
        return h
    pad = np.repeat(h[..., -1:], n - h.shape[-1], axis=-1)
    return np.concatenate([h, pad], axis=-1)


def pem_hybrid(H, P_tot, sigma2, N_s: int, beta=None, digital=None) -> BaselineReport:
    """PEM-style hybrid precoder: phases of the WMMSE precoder plus a least-squares baseband."""
    H = np.asarray(H, dtype=complex)
    t0 = time.perf_counter()
    K, N_t = H.shape[-2:]
    if N_s > N_t:
        raise ValueError(f"need N_s <= N_t, got N_s={N_s}, N_t={N_t}")
    F = wmmse(H, P_tot, sigma2, beta).solution if digital is None else digital
    cols = [F[..., : min(K, N_s)]]
    if N_s > K:
        U = np.linalg.svd(np.conj(np.swapaxes(H, -1, -2)))[0]
        cols.append(U[..., : N_s - K])
    W_RF = obj.project_constant_modulus(np.concatenate(cols, axis=-1))
    W_BB = np.linalg.pinv(W_RF) @ F
    P = np.broadcast_to(np.asarray(P_tot, dtype=float), H.shape[:-2])
    W_BB = obj.project_power(W_RF, W_BB, P)
    rates = obj.sum_rate(H, W_RF @ W_BB, sigma2, beta)
    return BaselineReport("pem", rates, 0, time.perf_counter() - t0, obj.HybridSolution(W_RF, W_BB))


def _hybrid_given_rf(H, W_RF, P_tot, sigma2, beta, max_iters=100):
    """Best-effort baseband for fixed analog precoders: WMMSE on the whitened effective channel."""
    Q, R = np.linalg.qr(W_RF)
    G = H @ np.conj(Q)  # conj(G) @ x == conj(H) @ Q @ x
    x = wmmse(G, P_tot, sigma2, beta, max_iters=max_iters, tol=1e-10).solution
    W_BB = np.linalg.solve(R, x)
    return W_BB, obj.sum_rate(H, W_RF @ W_BB, sigma2, beta)


def random_search_oracle(inst: obj.HybridInstance, N_s: int, budget: int = 10_000, seed: int = 0,
                         min_step: float = 1e-4, max_sweeps: int = 2000) -> BaselineReport:
    """Best of the PEM point and ``budget`` random analog precoders, then phase coordinate ascent.

    Candidates get their baseband from WMMSE on the effective channel. The
    incumbent is replaced only on strict improvement, so the result is never
    below the PEM point. Intended for tiny instances (N_t <= 8, K <= 3).
    """
    t0 = time.perf_counter()
    H, beta, P, s2 = inst.H, inst.beta, inst.P_tot, inst.sigma2
    if H.ndim != 2:
        raise ValueError("random_search_oracle works on a single instance")
    N_t = H.shape[1]
    rng = np.random.default_rng([seed, 3])
    pem = pem_hybrid(H, P, s2, N_s, beta)
    best = pem.solution
    best_rate = float(pem.rates)

    def screen(phases):
        W_RF = np.exp(1j * phases)
        Hb = np.broadcast_to(H, (len(phases),) + H.shape)
        W_BB, rates = _hybrid_given_rf(Hb, W_RF, P, s2, beta, max_iters=30)
        return W_RF, W_BB, rates

    phase = np.angle(best.W_RF)
    chunk = 2000
    for lo in range(0, budget, chunk):
        cand = rng.uniform(0, 2 * np.pi, (min(chunk, budget - lo), N_t, N_s))
        W_RF, W_BB, rates = screen(cand)
        i = int(np.argmax(rates))
        if rates[i] > best_rate:
            best_rate, best, phase = float(rates[i]), obj.HybridSolution(W_RF[i], W_BB[i]), cand[i]

    # greedy coordinate ascent on the analog phases with a shrinking step
    step = np.pi / 8
    sweeps = 0
    n = N_t * N_s
    while step >= min_step and sweeps < max_sweeps:
        sweeps += 1
        delta = np.zeros((2 * n, N_t, N_s))
        delta.reshape(2 * n, n)[np.arange(n), np.arange(n)] = step
        delta.reshape(2 * n, n)[n + np.arange(n), np.arange(n)] = -step
        W_RF, W_BB, rates = screen(phase + delta)
        i = int(np.argmax(rates))
        if rates[i] > best_rate:
            best_rate, best, phase = float(rates[i]), obj.HybridSolution(W_RF[i], W_BB[i]), phase + delta[i]
        else:
            step /= 2
    W_BB = obj.project_power(best.W_RF, best.W_BB, P)
    sol = obj.HybridSolution(obj.project_constant_modulus(best.W_RF), W_BB)
    rate = float(obj.weighted_sum_rate(inst, sol))
    if rate < float(pem.rates):  # projection round-off can only cost ~1e-15; keep the PEM point then
        sol, rate = pem.solution, float(pem.rates)
    return BaselineReport("oracle", np.asarray(rate), sweeps, time.perf_counter() - t0, sol)


def wmmse_power(G, P_M, sigma2, max_iters: int = 500, tol: float = 1e-10) -> BaselineReport:
    """Scalar WMMSE power control for the interference channel, started at full power.

    ``G[..., k, i]`` is the gain from transmitter ``i`` at receiver ``k``.
    ``history`` holds the per-iteration sum-rate.
    """
    G = np.asarray(G, dtype=float)
    t0 = time.perf_counter()
    if np.any(np.diagonal(G, axis1=-2, axis2=-1) <= 0):
        raise ValueError("direct-link gains must be positive")
    a = np.sqrt(np.diagonal(G, axis1=-2, axis2=-1))
    v = np.full(G.shape[:-1], np.sqrt(P_M))
    history = [obj.pc_rate(G, v**2, sigma2)]
    it = 0
    for it in range(1, max_iters + 1):
        total = np.einsum("...ki,...i->...k", G, v**2) + sigma2
        u = a * v / total
        w = 1.0 / (1.0 - u * a * v)
        denom = np.einsum("...jk,...j->...k", G, w * u**2)
        v = np.clip(w * u * a / denom, 0.0, np.sqrt(P_M))
        history.append(obj.pc_rate(G, v**2, sigma2))
        if np.all(np.abs(history[-1] - history[-2]) <= tol):
            break
    p = v**2
    rates = obj.pc_rate(G, p, sigma2)
    return BaselineReport("wmmse_power", rates, it, time.perf_counter() - t0, p, np.stack(history, axis=-1))


BASELINES = {"mrt": mrt, "zf": zf, "wmmse": wmmse}
