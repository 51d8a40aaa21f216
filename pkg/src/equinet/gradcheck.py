"""Central finite-difference checks of the reverse-mode gradients.

The error reported for a parameter tensor is ``max|g - g_fd| / max|g_fd|``,
i.e. relative to the largest finite-difference entry, which stays meaningful
when individual entries are near zero. A tensor whose true gradient vanishes
(a bias followed by normalization) is measured against the largest gradient
of the whole model instead.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from equinet.autodiff import Var


def numerical_grad(fn: Callable[[], Var], param: Var, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(param.data, dtype=float)
    flat = param.data.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = fn().item()
        flat[i] = old - eps
        down = fn().item()
        flat[i] = old
        gf[i] = (up - down) / (2 * eps)
    return g


def relative_error(g: np.ndarray, g_fd: np.ndarray, floor: float = 0.0) -> float:
    scale = max(np.max(np.abs(g_fd)), floor)
    if scale == 0:
        return float(np.max(np.abs(g)))
    return float(np.max(np.abs(g - g_fd)) / scale)


def check_gradients(fn: Callable[[], Var], params: Sequence[Var], eps: float = 1e-6) -> float:
    """Worst relative error over ``params`` of the analytic gradient of scalar ``fn()``."""
    for p in params:
        if p.data.dtype != np.float64:
            raise TypeError("gradient checks need float64 parameters")
        p.grad = None
    out = fn()
    if not np.isfinite(out.item()):
        raise FloatingPointError(f"non-finite objective {out.item()}")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]
    numeric = [numerical_grad(fn, p, eps) for p in params]
    floor = 1e-4 * max(float(np.max(np.abs(n))) for n in numeric)
    return max(relative_error(g, n, floor) for g, n in zip(analytic, numeric))


# problem id -> (head, extents) for the suite; every layer kind appears at least once
SUITE = {
    "1d": dict(problem="hybrid1d", K=2, N_t=3, N_s=2),
    "2d": dict(problem="hybrid2d", K=2, N_t=3, N_s=2),
    "3d": dict(problem="hybrid3d", K=2, N_t=2, N_s=2),
    "4d": dict(problem="wideband4d", K=2, N_t=2, N_s=2, M=2),
    "miso": dict(problem="miso2d", K=2, N_t=3),
    "joint": dict(problem="power", K=3, P_tot=1.0, sigma2=0.1),
    "nested": dict(problem="miso2d", K=2, N_t=4, antenna_subsets=[2, 2]),
}

ALIASES = {"p1": "3d", "p2": "4d", "pc": "joint", "hybrid3d": "3d", "hybrid2d": "2d", "hybrid1d": "1d",
           "wideband4d": "4d", "miso2d": "miso", "power": "joint"}


def random_batch(spec, rng: np.random.Generator, batch: int = 2) -> dict:
    from equinet import channels

    if spec.problem == "power":
        return {"G": channels.gen_pc_gains(spec.K, rng, batch)}
    if spec.problem == "wideband4d":
        H = np.stack([channels.gen_rayleigh_iid(spec.K, spec.N_t, rng, batch) for _ in range(spec.M)], axis=1)
    else:
        H = channels.gen_rayleigh_iid(spec.K, spec.N_t, rng, batch)
    return {"H": H, "beta": rng.uniform(0.5, 1.5, (batch, spec.K)), "P_tot": rng.uniform(0.5, 2.0, batch)}


def check_head(name: str, seed: int = 0, hidden=(3, 3), norm: bool = False) -> float:
    from equinet.problems.heads import ModelSpec, build_head

    key = ALIASES.get(name, name)
    if key not in SUITE:
        raise KeyError(f"unknown gradient-check case {name!r}; expected one of {sorted(SUITE)}")
    kw = dict(SUITE[key])
    spec = ModelSpec(hidden=list(hidden), norm=norm, sigma2=kw.pop("sigma2", 0.5), **kw)
    model = build_head(spec, seed=seed, dtype=np.float64)
    rng = np.random.default_rng([seed, 2])
    # perturb biases away from zero so every parameter has a generic gradient
    for p in model.parameters():
        p.data += 0.1 * rng.standard_normal(p.data.shape)
    batch = random_batch(spec, rng)
    model.set_training(True)
    return check_gradients(lambda: model.objective(batch).mean(), model.parameters())


def run_suite(seed: int = 0, cases: Sequence[str] | None = None) -> dict[str, float]:
    return {c: check_head(c, seed) for c in (cases or SUITE)}
