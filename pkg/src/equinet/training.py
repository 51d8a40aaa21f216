"""Adam and the unsupervised mini-batch training loop.

Heads expose ``objective(batch)`` (per-sample sum-rate, to be maximized), so
the loss minimized here is its negated batch mean.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from equinet import autodiff as ad

log = logging.getLogger(__name__)


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, weights: Sequence[np.ndarray], **kw) -> "AdamState":
        return cls([np.zeros_like(w) for w in weights], [np.zeros_like(w) for w in weights], **kw)


def adam_step(state: AdamState, grads: Sequence[np.ndarray], weights: Sequence[np.ndarray]):
    """One bias-corrected Adam update. Returns ``(new_weights, new_state)``; inputs are untouched."""
    if len(grads) != len(weights) or len(weights) != len(state.m):
        raise ValueError("grads, weights and optimizer state must have the same length")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m_new, v_new, w_new = [], [], []
    for w, g, m, v in zip(weights, grads, state.m, state.v):
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} does not match weight shape {w.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        w_new.append((w - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(w.dtype))
        m_new.append(m.astype(w.dtype))
        v_new.append(v.astype(w.dtype))
    new_state = AdamState(m_new, v_new, t, state.lr, b1, b2, state.eps)
    return w_new, new_state


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 500
    lr: float = 1e-3
    seed: int = 0
    log_every: int = 0


@dataclass
class TrainResult:
    train_history: list[float] = field(default_factory=list)
    val_history: list[float] = field(default_factory=list)
    steps: int = 0


def n_samples(data: dict) -> int:
    sizes = {len(v) for v in data.values() if np.ndim(v) > 0}
    if len(sizes) != 1:
        raise ValueError(f"dataset arrays disagree on the sample count: {sorted(sizes)}")
    return sizes.pop()


def take(data: dict, idx) -> dict:
    return {k: (v[idx] if np.ndim(v) > 0 else v) for k, v in data.items()}


def evaluate(model, data: dict, batch_size: int = 2000) -> np.ndarray:
    """Per-sample objective with the model in inference mode."""
    model.set_training(False)
    out = []
    n = n_samples(data)
    with ad.no_grad():
        for lo in range(0, n, batch_size):
            out.append(model.objective(take(data, slice(lo, lo + batch_size))).data.astype(float))
    return np.concatenate(out)


def train(model, dataset: dict, config: TrainConfig | None = None, val: dict | None = None) -> TrainResult:
    """Maximize the mean objective over shuffled mini-batches with Adam.

    ``train_history[e]`` is the mean training objective over the batches of epoch
    ``e`` (recorded while training); ``val_history[e]`` the validation objective
    at the end of the epoch when ``val`` is given.
    """
    config = config or TrainConfig()
    params = model.parameters()
    state = AdamState.zeros_like([p.data for p in params], lr=config.lr)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    n = n_samples(dataset)
    bs = min(config.batch_size, n)
    result = TrainResult()
    for epoch in range(config.epochs):
        model.set_training(True)
        order = shuffle_rng.permutation(n)
        total, count = 0.0, 0
        for b, lo in enumerate(range(0, n - bs + 1, bs)):
            batch = take(dataset, order[lo : lo + bs])
            for p in params:
                p.grad = None
            objective = model.objective(batch).mean()
            loss = -objective
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(epoch, b, value)
            loss.backward()
            grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]
            new, state = adam_step(state, grads, [p.data for p in params])
            for p, w in zip(params, new):
                p.data = w
            total += -value * bs
            count += bs
            result.steps += 1
        result.train_history.append(total / count)
        if val is not None:
            result.val_history.append(float(evaluate(model, val).mean()))
        if config.log_every and (epoch + 1) % config.log_every == 0:
            log.info("epoch %d train %.4f val %s", epoch + 1, result.train_history[-1],
                     f"{result.val_history[-1]:.4f}" if result.val_history else "-")
    model.set_training(False)
    return result


def get_weights(model) -> list[np.ndarray]:
    return [p.data.copy() for p in model.parameters()] + [b.copy() for b in model.buffers()]


def set_weights(model, arrays: Sequence[np.ndarray]) -> None:
    params = model.parameters()
    if len(arrays) != len(params) + len(model.buffers()):
        raise ValueError("checkpoint does not match the model's parameter layout")
    for p, a in zip(params, arrays):
        if p.data.shape != np.shape(a):
            raise ValueError(f"weight shape {np.shape(a)} does not match {p.data.shape}")
        p.data = np.asarray(a, dtype=p.data.dtype).copy()
    model.load_buffers(arrays[len(params) :])
