"""Command line entry point: ``spdenoise <subcommand> --config FILE ...``.

Configs are JSON.  ``simulate``, ``estimate``, ``rate`` and ``hellinger`` read
a model description, either bare or under a ``"model"`` key; ``experiment``
reads a full experiment config.  Exit codes: 0 success, 1 config or input
error, 2 experiment aborted on too many degenerate replicates.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import harness, oracle
from .estimator import estimate
from .hellinger import hellinger_bound_commuting, minimax_report
from .information import nonparametric_rate, parametric_rate, rate_report
from .simulator import GridRule, TimeGrid, load_record, save_record, simulate_observations, write_record_csv
from .spectral_model import ModelRecipe

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _emit(record: dict, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "json":
        json.dump(_jsonable(record), out, indent=2)
        out.write("\n")
        return
    width = max(len(k) for k in record)
    for k, v in record.items():
        out.write(f"{k:<{width}}  {_jsonable(v)}\n")


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_model_config(path):
    data = _load_json(path)
    recipe = ModelRecipe.from_dict(data.get("model", data))
    grid = GridRule.from_dict(data["grid_rule"]) if "grid_rule" in data else GridRule()
    return recipe, grid


def _workers(args):
    if args.workers is not None:
        return args.workers
    return int(os.environ.get("WORKERS", "1"))


def cmd_simulate(args):
    recipe, rule = _load_model_config(args.config)
    if args.dt is not None:
        rule = GridRule("dt", args.dt)
    model = recipe.build()
    theta = model.theta_hi if args.theta is None else args.theta
    rec = simulate_observations(model, theta, rule, seed=args.seed, replicate=args.replicate,
                                retain_state=args.retain_state)
    save_record(args.out, rec)
    if args.csv:
        write_record_csv(args.csv, rec)
    _emit({"modes": len(model), "theta_true": theta, "seed": args.seed, "record": args.out,
           "steps": sum(g.n_steps for g in rec.grids)}, args.format)
    return EXIT_OK


def cmd_estimate(args):
    rec = load_record(args.record)
    model = rec.model
    if args.config:
        recipe, _ = _load_model_config(args.config)
        model = recipe.build()
    res = estimate(model, rec)
    _emit({"theta_hat": res.theta_hat, "Z": res.Z, "N": res.N, "degenerate": res.degenerate,
           "theta_true": rec.theta_true}, args.format)
    return EXIT_OK


def _parse_params(items):
    out = {}
    for item in items or ():
        key, _, value = item.partition("=")
        if not _:
            raise ValueError(f"parameter {item!r} is not key=value")
        out[key] = float(value)
    return out


def cmd_rate(args):
    if args.example:
        params = _parse_params(args.param)
        if args.alpha is not None:
            cf = nonparametric_rate(args.example, args.alpha, int(params.pop("d", 1)), **params)
        else:
            cf = parametric_rate(args.example, params)
        _emit({"rate": cf.rate, "regime": cf.regime, "exponents": cf.exponents,
               "threshold": cf.threshold, "validity": cf.validity}, args.format)
        return EXIT_OK
    if not args.config:
        raise ValueError("rate needs --config or --example")
    recipe, _ = _load_model_config(args.config)
    _emit(rate_report(recipe.build(), args.theta).to_dict(), args.format)
    return EXIT_OK


def cmd_hellinger(args):
    recipe, _ = _load_model_config(args.config)
    model = recipe.build()
    fn = minimax_report if args.minimax else hellinger_bound_commuting
    _emit(fn(model, args.theta0, args.theta1).to_dict(), args.format)
    return EXIT_OK


def cmd_experiment(args):
    cfg = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = harness.ExperimentConfig(**{**cfg.__dict__, "master_seed": args.seed})
    csv_path = args.csv or cfg.csv_path
    if csv_path is None:
        raise ValueError("no CSV output path: set outputs.csv or pass --csv")
    try:
        result = harness.run_experiment(cfg, workers=_workers(args))
    except harness.DegenerateExcess as exc:
        harness.emit_outputs(exc.result, csv_path, args.plot, status="aborted")
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    harness.emit_outputs(result, csv_path, args.plot)
    fit = result.fit
    _emit({"slope": fit.slope, "stderr": fit.stderr, "r2": fit.r2,
           "rmse": result.rmse, "csv": csv_path}, args.format)
    return EXIT_OK


def _oracle_checks(quick):
    n_big = 2000 if quick else 4000
    g = TimeGrid(5.0, n_big)
    g2 = TimeGrid(5.0, n_big * 2)
    checks = []
    for lam, T, n, tol in [(-1.0, 10.0, 2000, 1.01), (0.0, 1.0, 1000, None), (-100.0, 1.0, 10_000, 1.02)]:
        norm, bound = oracle.check_rs_norm(lam, TimeGrid(T, n))
        limit = bound if tol is None else min(tol, bound)
        checks.append((f"rs_norm lam={lam} T={T} n={n}", norm, limit, norm <= limit))
    for lam1 in (-2.0, -1 + 2j):
        r1 = oracle.check_perturbation_identity(-1.0, lam1, g)
        r2 = oracle.check_perturbation_identity(-1.0, lam1, g2)
        checks.append((f"perturbation lam1={lam1}", r1, 5e-3, r1 < 5e-3 and r2 <= 0.5 * r1 * 1.05))
    for lam in (0.0, -1.0, -1 + 1j):
        ga, gb = TimeGrid(2.0, 200), TimeGrid(2.0, 400)
        ra, rb = oracle.check_cov_factorization(lam, ga), oracle.check_cov_factorization(lam, gb)
        ok = ra < ga.dt and (rb <= 0.55 * ra or ra < 1e-12)
        checks.append((f"cov_factorization lam={lam}", ra, ga.dt, ok))
    b, eps = 1.0, 0.1
    h512 = oracle.matrix_hellinger(-1.0, -1.1, b, eps, TimeGrid(4.0, 512))
    h1024 = oracle.matrix_hellinger(-1.0, -1.1, b, eps, TimeGrid(4.0, 1024))
    checks.append(("matrix_hellinger refinement", abs(h512 - h1024), 1e-3, abs(h512 - h1024) < 1e-3))
    return checks


def cmd_oracle_check(args):
    checks = _oracle_checks(args.quick)
    for name, value, limit, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.4g} (limit {limit:.4g})")
    return EXIT_OK if all(c[3] for c in checks) else EXIT_CONFIG


def build_parser():
    p = argparse.ArgumentParser(prog="spdenoise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None, help="worker threads (default: $WORKERS or 1)")
        sp.add_argument("--retain-state", action="store_true", help="keep latent state paths in records")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        return sp

    sp = common(sub.add_parser("simulate", help="simulate one observation record"))
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--out", required=True, help="binary record path")
    sp.add_argument("--csv", default=None, help="optional CSV dump")
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("estimate", help="estimate theta from a record"), config_required=False)
    sp.add_argument("--record", required=True)
    sp.set_defaults(func=cmd_estimate)

    sp = common(sub.add_parser("rate", help="information functional and rate report"), config_required=False)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--example", default=None, help="closed-form example id instead of a model")
    sp.add_argument("--param", action="append", help="key=value for --example")
    sp.add_argument("--alpha", type=float, default=None, help="smoothness: switches to the nonparametric table")
    sp.set_defaults(func=cmd_rate)

    sp = common(sub.add_parser("hellinger", help="Hellinger bound between two parameters"))
    sp.add_argument("--theta0", type=float, required=True)
    sp.add_argument("--theta1", type=float, required=True)
    sp.add_argument("--minimax", action="store_true")
    sp.set_defaults(func=cmd_hellinger)

    sp = common(sub.add_parser("experiment", help="Monte Carlo sweep and slope fit"))
    sp.add_argument("--csv", default=None)
    sp.add_argument("--plot", default=None)
    sp.set_defaults(func=cmd_experiment)

    sp = common(sub.add_parser("oracle-check", help="run the matrix oracle checks"), config_required=False)
    sp.add_argument("--quick", action="store_true")
    sp.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command == "simulate":
        args.seed = 0
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
