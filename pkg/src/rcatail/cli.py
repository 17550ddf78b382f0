"""Command-line front end.

Every command reads a model JSON file (or a CSV for ``hill``), writes data
to stdout (or ``--out``) and a short human summary to stderr. JSON output
carries the resolved configuration under ``"config"`` so a result can be
traced back to the exact invocation.

Exit codes: 0 success, 2 invalid model or input, 3 stationarity required
but absent, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import InvalidModelError, NotStationaryError, NumericalError
from .model import load_model, model_to_dict, validate
from .simulate import DEFAULT_BURN_IN, SimConfig, equivalence_test, simulate_ar_arch, simulate_path
from .spectral import METHODS, solve_lambda
from .sphere_chain import estimate_beta, estimate_lyapunov
from .stationarity import check_d0
from .tailindex import hill, hill_table, verify_power_law, write_hill_table
from ._parallel import set_max_workers

EXIT_OK, EXIT_INVALID, EXIT_NOT_STATIONARY, EXIT_NUMERICAL = 0, 2, 3, 4
DEFAULT_SEED = 0


def _clean(obj):
    # JSON-safe copy: numpy scalars to python, non-finite floats to null
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _emit(args, config, result):
    text = json.dumps(_clean({"config": config, "result": result}), indent=2, sort_keys=True)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _config(args, model=None, **extra):
    cfg = {"command": args.command, "seed": args.seed}
    if model is not None:
        cfg["model"] = model_to_dict(model)
    cfg.update(extra)
    return cfg


def _load(args):
    model = load_model(args.model)
    report = validate(model)
    if not report.accepted:
        raise InvalidModelError("; ".join(v.message for v in report.violations if v.hard))
    for v in report.violations:
        print(f"warning: {v.message}", file=sys.stderr)
    return model


def cmd_check(args):
    model = _load(args)
    rep = check_d0(model)
    state = "stationary" if rep.is_stationary else "NOT stationary"
    print(f"spectral radius {rep.spectral_radius:.6g}: {state}", file=sys.stderr)
    _emit(args, _config(args, model), {**rep.to_dict(), "validation": validate(model).to_dict()})


def cmd_lambda(args):
    model = _load(args)
    sol = solve_lambda(model, args.method, tol=args.tol, rng=args.seed, mc_n=args.mc_n,
                       mc_paths=args.paths, grid_size=args.grid_size)
    print(f"lambda* = {sol.lam:.6f} ({sol.method})", file=sys.stderr)
    if not sol.resolved:
        print("warning: Monte Carlo noise left the root unresolved at the path cap", file=sys.stderr)
    cfg = _config(args, model, method=args.method, tol=args.tol, mc_n=args.mc_n,
                  paths=args.paths, grid_size=args.grid_size)
    _emit(args, cfg, sol.to_dict())


def cmd_simulate(args):
    model = _load(args)
    cfg = SimConfig(n=args.n, burn_in=args.burn_in, seed=args.seed)
    sim = simulate_ar_arch if args.ar_arch else simulate_path
    path = sim(model, cfg)
    if args.out:
        path.to_csv(args.out)
    else:
        path.to_csv(sys.stdout)
    print(f"simulated {args.n} values ({path.kind}) after {args.burn_in} burn-in steps",
          file=sys.stderr)


def cmd_equiv(args):
    model = _load(args)
    rep = equivalence_test(model, args.n, seed=args.seed, burn_in=args.burn_in, thin=args.thin)
    print("equivalence " + ("passed" if rep.passed else "FAILED"), file=sys.stderr)
    _emit(args, _config(args, model, n=args.n, burn_in=args.burn_in, thin=args.thin),
          rep.to_dict())


def cmd_chain(args):
    model = _load(args)
    seeds = np.random.SeedSequence(args.seed).spawn(3)
    lyap = estimate_lyapunov(model, n=args.n, paths=args.paths, rng=seeds[0])
    result = {"lyapunov": lyap.to_dict(), "beta": None, "lambda": None}
    print(f"gamma = {lyap.gamma:.6g} +/- {lyap.stderr:.2g}", file=sys.stderr)
    rep = check_d0(model)
    if rep.is_stationary:
        method = args.method or ("q1-exact" if model.q == 1 and model.is_gaussian else "spectral")
        sol = solve_lambda(model, method, rng=seeds[1])
        beta = estimate_beta(model, sol, method=args.beta_method, rng=seeds[2])
        result["lambda"] = {"lambda": sol.lam, "method": method}
        result["beta"] = beta.to_dict()
        print(f"beta = {beta.beta:.6g} at lambda = {sol.lam:.6g}", file=sys.stderr)
    else:
        print("model is not stationary: no tail index, beta skipped", file=sys.stderr)
    _emit(args, _config(args, model, n=args.n, paths=args.paths, method=args.method,
                        beta_method=args.beta_method), result)


def _read_sample(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise InvalidModelError(f"{path}: empty file")
    col = -1
    try:
        float(rows[0][col])
    except ValueError:
        header = rows.pop(0)
        col = header.index("value") if "value" in header else -1
    try:
        return np.array([float(r[col]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise InvalidModelError(f"{path}: cannot read numeric column: {exc}") from exc


def cmd_hill(args):
    x = _read_sample(args.csv)
    if not args.two_sided:
        tail = x
    else:
        tail = np.abs(x)
    k = args.k if args.k is not None else max(1, int(round(0.01 * np.sum(tail > 0))))
    est = hill(tail, k)
    print(f"hill lambda = {est.lambda_hat:.4f} +/- {est.stderr:.2g} (k = {k})", file=sys.stderr)
    if args.table:
        write_hill_table(args.table, hill_table(tail))
    cfg = {"command": args.command, "csv": args.csv, "k": k, "two_sided": args.two_sided}
    _emit(args, cfg, est.to_dict())


def cmd_tailcheck(args):
    model = _load(args)
    rep = verify_power_law(model, direction=args.direction, n_draws=args.n,
                           k_fraction=args.k_fraction, rng=args.seed, tolerance=args.tolerance,
                           solver_method=args.method)
    if args.table:
        write_hill_table(args.table, rep.hill_table)
    print(f"hill {rep.hill.lambda_hat:.4f}, log-log {rep.loglog.lambda_hat:.4f}, "
          f"solver {rep.lambda_star:.4f}: " + ("agree" if rep.agrees else "DISAGREE"),
          file=sys.stderr)
    cfg = _config(args, model, n=args.n, k_fraction=args.k_fraction, direction=args.direction,
                  tolerance=args.tolerance, method=rep.solver_method)
    _emit(args, cfg, rep.to_dict())


def build_parser():
    p = argparse.ArgumentParser(prog="rcatail",
                                description="Tail index and diagnostics for random coefficient autoregressions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="root seed (default %(default)s)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads; results do not depend on it")
    common.add_argument("--out", help="write data here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="second-moment stationarity report")
    s.add_argument("model")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("lambda", parents=[common], help="solve kappa(lambda) = 1")
    s.add_argument("model")
    s.add_argument("--method", choices=METHODS, default="spectral")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--paths", type=int, default=100_000, help="initial Monte Carlo paths")
    s.add_argument("--mc-n", type=int, default=30, help="product length for --method mc")
    s.add_argument("--grid-size", type=int, default=None)
    s.set_defaults(func=cmd_lambda)

    s = sub.add_parser("simulate", parents=[common], help="simulate a path to CSV")
    s.add_argument("model")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    s.add_argument("--ar-arch", action="store_true", help="use the AR-ARCH recursion")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("equiv", parents=[common], help="RCA versus AR-ARCH equivalence test")
    s.add_argument("model")
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    s.add_argument("--thin", type=int, default=10)
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("chain", parents=[common], help="Lyapunov exponent and tilted drift")
    s.add_argument("model")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--paths", type=int, default=256)
    s.add_argument("--method", choices=METHODS, default=None, help="tail index solver")
    s.add_argument("--beta-method", choices=("quadrature", "tilted"), default=None)
    s.set_defaults(func=cmd_chain)

    s = sub.add_parser("hill", parents=[common], help="Hill estimate from a CSV column")
    s.add_argument("csv")
    s.add_argument("--k", type=int, default=None, help="order statistics (default 1%% of sample)")
    s.add_argument("--two-sided", action="store_true", help="use absolute values")
    s.add_argument("--table", help="also write a Hill-plot table CSV here")
    s.set_defaults(func=cmd_hill)

    s = sub.add_parser("tailcheck", parents=[common], help="empirical tail versus solver")
    s.add_argument("model")
    s.add_argument("--n", type=int, default=10**6)
    s.add_argument("--k-fraction", type=float, default=0.01)
    s.add_argument("--direction", type=float, nargs="+", default=None)
    s.add_argument("--tolerance", type=float, default=0.15)
    s.add_argument("--method", choices=METHODS, default=None)
    s.add_argument("--table", help="also write the Hill-plot table CSV here")
    s.set_defaults(func=cmd_tailcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    set_max_workers(args.threads)
    try:
        args.func(args)
    except NotStationaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_STATIONARY
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
