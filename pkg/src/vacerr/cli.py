"""Command-line front end.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
import warnings

import numpy as np

from .basis import basis_from_json, indicator_basis, polynomial_basis_2d
from .diagnostics import condition_number, estimate_mse, min_condition_number, mse_to_csv
from .exceptions import (ConfigError, InsufficientDataError, InvalidArgumentError, VacError)
from .experiments import PRESETS, build_reference, load_config, run_bounds, run_experiment
from .sde import DoubleWellSpec, read_trajectory, simulate_double_well, simulate_ou, write_trajectory
from .vac import EmptyCellWarning, estimate_pair, implied_timescales, solve_vac

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def parse_basis(text: str):
    """``indicator:N[:OFFSET]``, ``polynomial-2d``, a JSON descriptor, or ``@file.json``."""
    if text.startswith("@"):
        with open(text[1:]) as fh:
            return basis_from_json(fh.read())
    if text.startswith("{"):
        return basis_from_json(text)
    if text == "polynomial-2d":
        return polynomial_basis_2d()
    if text.startswith("indicator:"):
        parts = text.split(":")[1:]
        try:
            n = int(parts[0])
            offset = float(parts[1]) if len(parts) > 1 else 0.0
        except (ValueError, IndexError):
            raise InvalidArgumentError(f"cannot parse basis {text!r}") from None
        return indicator_basis(n, offset)
    raise InvalidArgumentError(f"unknown basis {text!r}")


def _taus(values):
    if values is None:
        return None
    out = []
    for v in values:
        out += [float(x) for x in str(v).split(",") if x]
    return out


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def cmd_simulate(args):
    if args.process == "ou":
        traj = simulate_ou(args.duration, args.delta, seed=args.seed, trial=args.trial)
    else:
        traj = simulate_double_well(DoubleWellSpec(), args.duration, args.delta, seed=args.seed,
                                    trial=args.trial)
    write_trajectory(traj, args.out)
    print(f"wrote {traj.n_samples} states of dimension {traj.dim} to {args.out}", file=sys.stderr)


def _solve(traj, basis, tau):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyCellWarning)
        return solve_vac(estimate_pair(traj, basis, tau))


def cmd_vac(args):
    traj = read_trajectory(args.traj)
    basis = parse_basis(args.basis)
    sol = _solve(traj, basis, args.tau)
    d = sol.to_dict()
    d["timescales"] = [None if not np.isfinite(t) else float(t) for t in implied_timescales(sol)]
    with _open_out(args.out) as fh:
        fh.write(json.dumps(d, indent=2) + "\n")


def _blocks(args):
    return [tuple(b) for b in args.block] if args.block else [(1, 2)]


def cmd_mse(args):
    traj = read_trajectory(args.traj)
    basis = parse_basis(args.basis)
    reports = [estimate_mse(traj, _solve(traj, basis, tau), basis, blocks=_blocks(args))
               for tau in _taus(args.tau)]
    with _open_out(args.out) as fh:
        mse_to_csv(reports, fh)


def cmd_condition(args):
    """Condition numbers per lag time from a trajectory or from the configured oracle."""
    blocks = _blocks(args)
    taus = _taus(args.tau)
    if args.config:
        cfg = load_config(args.config)
        ref = build_reference(cfg, cache_dir=args.cache_dir)
        if ref is None:
            raise ConfigError("configuration has no oracle")
        basis = cfg.make_basis()
        taus = taus or cfg.taus
        sols = [solve_vac(p) for p in ref.ideal_pairs(basis, taus)]
    else:
        if not args.traj or not args.basis:
            raise InvalidArgumentError("give --traj and --basis, or --config")
        traj = read_trajectory(args.traj)
        basis = parse_basis(args.basis)
        if not taus:
            raise InvalidArgumentError("give at least one --tau")
        sols = [_solve(traj, basis, t) for t in taus]
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "block", "condition"])
        for s in sols:
            for j, k in blocks:
                w.writerow([repr(float(s.tau)), f"{j}..{k}", repr(condition_number(s.eigenvalues, j, k))])
        for j, k in blocks:
            tau, val = min_condition_number(sols, j, k)
            w.writerow([f"min@{tau!r}", f"{j}..{k}", repr(val)])


def _overrides(args):
    over = {}
    if getattr(args, "trials", None) is not None:
        over["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    if getattr(args, "taus", None):
        over["taus"] = _taus(args.taus)
    if getattr(args, "mse_taus", None) is not None:
        over["mse_taus"] = _taus(args.mse_taus)
    return over


def cmd_bounds(args):
    cfg = load_config(args.config, **_overrides(args))
    out = args.out or f"runs/{cfg.name}-bounds"
    reports, _ = run_bounds(cfg, output=out, cache_dir=args.cache_dir)
    bad = sum(1 for r in reports if not r.satisfied)
    print(f"{len(reports)} bound evaluations, {bad} violated; results in {out}", file=sys.stderr)


def cmd_experiment(args):
    cfg = load_config(args.config, **_overrides(args))
    out = args.out or f"runs/{cfg.name}"
    res = run_experiment(cfg, output=out, cache_dir=args.cache_dir)
    for key, v in res.optimal.items():
        print(f"{key}: optimal tau {v['tau']:g} (mean true error {v['mean_true_error']:.4g})", file=sys.stderr)
    print(f"results in {out}", file=sys.stderr)


def _add_run_overrides(p):
    p.add_argument("--out", help="run directory (default runs/<name>)")
    p.add_argument("--cache-dir", default=None, help="oracle cache directory")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--taus", nargs="+", help="override the lag-time grid")
    p.add_argument("--mse-taus", nargs="*", help="lag times for the data-driven MSE (empty disables)")


def build_parser():
    parser = argparse.ArgumentParser(prog="vacerr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a stationary trajectory")
    p.add_argument("--process", choices=["ou", "double-well"], default="ou")
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=None)
    p.add_argument("--out", required=True, help=".csv or .npz")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("vac", help="estimate VAC eigenpairs from a trajectory (JSON)")
    p.add_argument("--traj", required=True)
    p.add_argument("--basis", required=True, help="indicator:N[:OFFSET], polynomial-2d, JSON or @file")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vac)

    p = sub.add_parser("mse", help="data-driven mean squared estimation error (CSV)")
    p.add_argument("--traj", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--tau", nargs="+", required=True)
    p.add_argument("--block", nargs=2, type=int, action="append", metavar=("J", "K"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_mse)

    p = sub.add_parser("condition", help="VAC condition numbers over lag times (CSV)")
    p.add_argument("--traj")
    p.add_argument("--basis")
    p.add_argument("--config", help=f"preset ({', '.join(PRESETS)}) or JSON file; uses its oracle")
    p.add_argument("--tau", nargs="*")
    p.add_argument("--block", nargs=2, type=int, action="append", metavar=("J", "K"))
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("bounds", help="approximation-error bounds over a lag-time grid")
    p.add_argument("config", help="preset name or JSON file")
    _add_run_overrides(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", help="run a preset or configuration file")
    p.add_argument("config", help=f"preset ({', '.join(PRESETS)}) or JSON file")
    _add_run_overrides(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (InvalidArgumentError, ConfigError, InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VacError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
