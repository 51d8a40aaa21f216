"""Dataset generation, training runs, checkpoints, evaluation and audits.

These are the building blocks behind the command line; each works on plain
arrays and dicts so scripts and tests can call them directly.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from equinet import baselines as bl
from equinet import channels
from equinet.problems import objectives as obj
from equinet.problems.heads import ModelSpec, build_head
from equinet.tensor import Permutation, permute_along
from equinet.toolkit import container
from equinet.toolkit.config import RunConfig
from equinet.training import TrainConfig, evaluate, get_weights, set_weights, train

CSV_HEADER = ["algorithm", "mean_sum_rate_bpshz", "relative_pct", "samples", "seed"]


# --- data --------------------------------------------------------------------


def generate_dataset(cfg: RunConfig, n_samples: int, seed: int) -> dict:
    s, c = cfg.system, cfg.channel
    if c.kind == "wideband":
        H = channels.gen_wideband(s.K, s.N_t, cfg.sv_params(), cfg.wb_params(), seed, n_samples)
    elif c.kind == "pc_gains":
        return {"G": channels.gen_pc_gains(s.K, seed, n_samples)}
    else:
        H = channels.generate(c.kind, s.K, s.N_t, n_samples, seed, sv=cfg.sv_params())
    return {"H": H}


def dataset_meta(cfg: RunConfig, seed: int) -> dict:
    return {"problem": cfg.problem, "channel": cfg.channel.__dict__, "system": cfg.system.__dict__, "seed": seed}


def save_dataset(path, data: dict, meta: dict) -> None:
    key = "G" if "G" in data else "H"
    container.write_tensor(path, data[key], {**meta, "key": key})


def load_dataset(path) -> tuple[dict, dict]:
    arr, meta = container.read_tensor(path)
    return {meta.get("key", "H"): arr}, meta


# --- training and checkpoints ------------------------------------------------


def run_training(cfg: RunConfig, dtype=np.float32, val: dict | None = None):
    t = cfg.train
    model = build_head(cfg.model_spec(), seed=t.seed, dtype=dtype)
    data = generate_dataset(cfg, t.n_train, seed=(t.seed + 1) * 1_000_003)
    if val is None:
        val = generate_dataset(cfg, t.n_val, seed=(t.seed + 1) * 1_000_003 + 1)
    result = train(model, data, TrainConfig(t.epochs, t.batch_size, t.lr, t.seed), val=val)
    return model, result


def save_checkpoint(out_dir, model, cfg: RunConfig, result=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays = get_weights(model)
    names = []
    for i, a in enumerate(arrays):
        name = f"tensor_{i:03d}.wt"
        container.write_tensor(out / name, a)
        names.append(name)
    manifest = {
        "format": "equinet-checkpoint",
        "version": 1,
        "config": cfg.to_dict(),
        "seed": cfg.train.seed,
        "dtype": str(arrays[0].dtype),
        "channels": model.gnn.channels,
        "orbits": json.loads(model.gnn.basis.to_json()),
        "n_parameters": len(model.parameters()),
        "tensors": names,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    if result is not None:
        with open(out / "history.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_sum_rate", "val_sum_rate"])
            for e, tr in enumerate(result.train_history):
                va = result.val_history[e] if e < len(result.val_history) else ""
                w.writerow([e + 1, f"{tr:.6f}", va if va == "" else f"{va:.6f}"])


def load_checkpoint(ckpt_dir):
    from equinet.toolkit.config import from_dict

    ckpt = Path(ckpt_dir)
    manifest = json.loads((ckpt / "manifest.json").read_text())
    cfg = from_dict(manifest["config"])
    model = build_head(cfg.model_spec(), seed=cfg.train.seed, dtype=np.dtype(manifest["dtype"]))
    arrays = [container.read_tensor(ckpt / name)[0] for name in manifest["tensors"]]
    set_weights(model, arrays)
    model.set_training(False)
    return model, cfg


# --- evaluation --------------------------------------------------------------


def baseline_rates(name: str, spec: ModelSpec, data: dict) -> np.ndarray:
    P, s2 = spec.P_tot, spec.sigma2
    if spec.problem == "power":
        if name == "wmmse_power":
            return bl.wmmse_power(data["G"], P, s2).rates
        if name == "full_power":
            return obj.pc_rate(data["G"], np.full(data["G"].shape[:-1], P), s2)
        raise KeyError(name)
    H = data["H"]
    if spec.problem == "wideband4d":
        if name not in bl.BASELINES:
            raise KeyError(name)
        # fully digital per-subcarrier reference with an equal power split
        return bl.BASELINES[name](H, P / H.shape[1], s2).rates.mean(axis=-1)
    if name == "pem":
        return bl.pem_hybrid(H, P, s2, spec.N_s).rates
    if name not in bl.BASELINES:
        raise KeyError(name)
    return bl.BASELINES[name](H, P, s2).rates


def eval_rows(model, data: dict, names, seed: int = 0) -> list[dict]:
    spec = model.spec
    n = len(next(iter(data.values())))
    results = {}
    for name in names:
        results[name] = float(np.mean(baseline_rates(name, spec, data)))
    results["gnn"] = float(np.mean(evaluate(model, data)))
    ref = max((results[nm] for nm in names), default=results["gnn"])
    return [
        {"algorithm": k, "mean_sum_rate_bpshz": v, "relative_pct": 100.0 * v / ref, "samples": n, "seed": seed}
        for k, v in results.items()
    ]


def write_csv(dest, rows) -> None:
    """Write eval rows to a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_rows(dest, rows)
        return
    with open(dest, "w", newline="") as fh:
        _write_rows(fh, rows)


def _write_rows(fh, rows) -> None:
    w = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "mean_sum_rate_bpshz": f"{r['mean_sum_rate_bpshz']:.6f}",
                    "relative_pct": f"{r['relative_pct']:.3f}"})


# --- audit -------------------------------------------------------------------


def _perm(n, rng):
    return Permutation.random(n, rng).map


def audit(model, trials: int = 100, seed: int = 0, batch: int = 4) -> dict:
    """Equivariance and constraint audit on random inputs.

    Returns a dict with the worst equivariance deviation, the worst constraint
    deviations, and ``ok``. Tolerances follow the model's float type.
    """
    from equinet.gradcheck import random_batch

    spec = model.spec
    rng = np.random.default_rng([seed, 4])
    tol = 1e-4 if model.dtype == np.float32 else 1e-9
    eq_err = 0.0
    modulus_err = 0.0
    power_err = 0.0
    for _ in range(trials):
        data = random_batch(spec, rng, batch)
        P = data.get("P_tot")
        if spec.problem == "power":
            p = model.predict(data)
            pi = _perm(spec.K, rng)
            Gp = permute_along(permute_along(data["G"], 1, pi), 2, pi)
            eq_err = max(eq_err, float(np.max(np.abs(model.predict({"G": Gp}) - permute_along(p, 1, pi)))))
            power_err = max(power_err, float(np.max(np.maximum(-p, 0))), float(np.max(np.maximum(p - spec.P_tot, 0))))
            continue
        H, beta = data["H"], data["beta"]
        if spec.problem == "wideband4d":
            pm, p1, p2 = _perm(spec.M, rng), _perm(spec.K, rng), _perm(spec.N_t, rng)
            Hp = permute_along(permute_along(permute_along(H, 1, pm), 2, p1), 3, p2)
            sol = model.predict(data)
            solp = model.predict({"H": Hp, "beta": permute_along(beta, 1, p1), "P_tot": P})
            exp_rf = permute_along(sol.W_RF, 1, p2)
            exp_bb = permute_along(permute_along(sol.W_BB, 1, pm), 3, p1)
            eq_err = max(eq_err, _maxdiff(solp.W_RF, exp_rf), _maxdiff(solp.W_BB, exp_bb))
        elif spec.problem == "miso2d":
            p1 = _perm(spec.K, rng)
            p2 = _perm(spec.N_t, rng) if not spec.antenna_subsets else _nested_perm(model, rng)
            Hp = permute_along(permute_along(H, 1, p1), 2, p2)
            W = model.predict(data)
            Wp = model.predict({"H": Hp, "P_tot": P})
            eq_err = max(eq_err, _maxdiff(Wp, permute_along(permute_along(W, 1, p2), 2, p1)))
            power_err = max(power_err, float(np.max(np.abs(np.sum(np.abs(W) ** 2, axis=(1, 2)) / P - 1))))
            continue
        else:
            p1 = _perm(spec.K, rng) if spec.problem != "hybrid1d" else np.arange(spec.K)
            p2 = _perm(spec.N_t, rng)
            Hp = permute_along(permute_along(H, 1, p1), 2, p2)
            sol = model.predict(data)
            solp = model.predict({"H": Hp, "beta": permute_along(beta, 1, p1), "P_tot": P})
            eq_err = max(eq_err, _maxdiff(solp.W_RF, permute_along(sol.W_RF, 1, p2)),
                         _maxdiff(solp.W_BB, permute_along(sol.W_BB, 2, p1)))
            if spec.problem == "hybrid3d":
                # permuting the virtual feature permutes the RF chains
                p3 = _perm(spec.N_s, rng)
                solv = model.predict_with_virtual(data, model.a[p3])
                eq_err = max(eq_err, _maxdiff(solv.W_RF, permute_along(sol.W_RF, 2, p3)),
                             _maxdiff(solv.W_BB, permute_along(sol.W_BB, 1, p3)))
        modulus_err = max(modulus_err, float(np.max(np.abs(np.abs(sol.W_RF) - 1))))
        power_err = max(power_err, float(np.max(np.abs(sol.power() / P - 1))))
    ok = eq_err <= tol and modulus_err <= 1e-12 and power_err <= 1e-6
    return {"equivariance_error": eq_err, "modulus_error": modulus_err, "power_error": power_err,
            "tolerance": tol, "trials": trials, "ok": bool(ok)}


def _nested_perm(model, rng):
    idx = model.signature.index("antennas")
    return model.signature.sets[idx].random_element(rng)


def _maxdiff(a, b) -> float:
    return float(np.max(np.abs(a - b)))


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0
