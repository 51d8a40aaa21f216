"""Command line entry point: ``equinet <command> [options]``.

Exit codes: 0 success, 1 failed check, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from equinet.toolkit import config as config_mod
from equinet.toolkit import experiments as ex
from equinet.toolkit.complexity import KINDS, ComplexityQuery, flops, weight_count

log = logging.getLogger("equinet")


class UsageError(Exception):
    pass


def _threads() -> int:
    raw = os.environ.get("EQUINET_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"EQUINET_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("EQUINET_THREADS must be >= 1")
    return n


def cmd_gen_channels(args) -> int:
    cfg = config_mod.load(args.config)
    n = args.samples or cfg.data.n_samples
    seed = cfg.data.seed if args.seed is None else args.seed
    data = ex.generate_dataset(cfg, n, seed)
    ex.save_dataset(args.out, data, ex.dataset_meta(cfg, seed))
    print(f"wrote {n} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = config_mod.load(args.config)
    model, result = ex.run_training(cfg)
    ex.save_checkpoint(args.out, model, cfg, result)
    val = result.val_history[-1] if result.val_history else float("nan")
    print(f"trained {cfg.problem}: final train {result.train_history[-1]:.4f}, val {val:.4f} bits/s/Hz")
    return 0


def cmd_eval(args) -> int:
    model, cfg = ex.load_checkpoint(args.ckpt)
    data, meta = ex.load_dataset(args.data)
    if meta.get("problem") not in (None, cfg.problem):
        raise UsageError(f"dataset was generated for {meta['problem']}, checkpoint is {cfg.problem}")
    names = [b for b in args.baselines.split(",") if b] if args.baselines else []
    try:
        rows = ex.eval_rows(model, data, names, seed=int(meta.get("seed", 0)))
    except KeyError as exc:
        raise UsageError(f"baseline {exc.args[0]!r} not available for problem {cfg.problem}") from None
    ex.write_csv(args.out or sys.stdout, rows)
    return 0


def cmd_audit(args) -> int:
    model, _ = ex.load_checkpoint(args.ckpt)
    report = ex.audit(model, trials=args.trials, seed=args.seed)
    print(json.dumps(report, indent=2))
    return 0 if report["ok"] else 1


def cmd_orbits(args) -> int:
    from equinet.equivariance import SetSignature, adjacency_mask, enumerate_orbits

    raw = json.loads(Path(args.signature).read_text())
    sig = SetSignature.from_dict(raw["signature"] if "signature" in raw else raw)
    names = [s.name for s in sig.sets]
    out_space = raw.get("out_space", names)
    in_space = raw.get("in_space", names)
    basis = enumerate_orbits(sig, out_space, in_space)
    counts = {"orbits": basis.n_orbits}
    if list(out_space) == list(in_space):
        counts["masked"] = adjacency_mask(basis).n_retained
    print(json.dumps(counts))
    expected = raw.get("expected")
    if expected:
        bad = {k: (counts.get(k), v) for k, v in expected.items() if counts.get(k) != v}
        if bad:
            print(f"mismatch: {bad}", file=sys.stderr)
            return 1
    return 0


def cmd_complexity(args) -> int:
    try:
        q = ComplexityQuery(args.kind.lower(), args.cl, args.cl1, args.k, args.nt, args.ns)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(json.dumps({"kind": q.kind, "flops": flops(q), "weights": weight_count(q)}))
    return 0


def cmd_gradcheck(args) -> int:
    from equinet.gradcheck import ALIASES, SUITE, check_head

    cases = list(SUITE) if args.problem == "all" else [args.problem]
    for c in cases:
        if ALIASES.get(c, c) not in SUITE:
            raise UsageError(f"unknown problem {c!r}; expected all, {', '.join(sorted(set(SUITE) | set(ALIASES)))}")
    worst = 0.0
    for c in cases:
        err = check_head(c, args.seed)
        worst = max(worst, err)
        print(f"{c}: max relative error {err:.3e}")
    ok = worst <= args.tol
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="equinet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-channels", help="generate a channel dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--samples", type=int)
    g.add_argument("--seed", type=int)
    g.set_defaults(fn=cmd_gen_channels)

    t = sub.add_parser("train", help="train a model and write a checkpoint directory")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="compare a checkpoint with baselines on a dataset")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--baselines", default="")
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("audit", help="check equivariance and constraints of a checkpoint")
    a.add_argument("--ckpt", required=True)
    a.add_argument("--trials", type=int, default=100)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(fn=cmd_audit)

    o = sub.add_parser("orbits", help="count orbits of a set signature")
    o.add_argument("--signature", required=True)
    o.set_defaults(fn=cmd_orbits)

    c = sub.add_parser("complexity", help="FLOPs and weights of one update layer")
    c.add_argument("--kind", required=True, choices=list(KINDS) + [k.upper() for k in KINDS])
    c.add_argument("--cl", type=int, required=True)
    c.add_argument("--cl1", type=int, required=True)
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--nt", type=int, default=1)
    c.add_argument("--ns", type=int, default=1)
    c.set_defaults(fn=cmd_complexity)

    d = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    d.add_argument("--problem", default="all")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--tol", type=float, default=1e-6)
    d.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _threads()
        return args.fn(args)
    except (UsageError, config_mod.ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
