"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver limit reached
(outputs are still written and carry the status), 4 internal error.

A ``--config FILE`` of ``key = value`` lines (``#`` starts a comment, keys are
the long option names with dashes or underscores) supplies defaults; flags
given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, Schema, load_csv, quadratic_expand, standardize
from .errors import (ContractError, DegenerateColumnError, ParseError, PrescienceError,
                     SchemaError)
from .mio import TRACE, Formulation, MioConfig, SolveStatus, solve_prescience
from .oracle import exact_max_score
from .score import ParamBox, l0_norm
from .selection import FitSpec, cross_validate_q, fit
from .sim import RNG_DESCRIPTION, DgpSpec, run_experiment
from .warmstart import fit_logit, tighten_bounds

logging.addLevelName(TRACE, "TRACE")
log = logging.getLogger("prescience")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LIMIT, EXIT_INTERNAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _int_list(text):
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p):
    p.add_argument("--config", help="key = value file providing defaults")
    p.add_argument("--output", "-o", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker processes for independent jobs")
    p.add_argument("--log-level", choices=["info", "debug", "trace"], default="info")


def _add_data(p):
    p.add_argument("--data", help="input CSV (header row required)")
    p.add_argument("--outcome", default="y", help="binary outcome column")
    p.add_argument("--x0", help="focus covariate whose coefficient is fixed to +-1")
    p.add_argument("--focus", default="", help="comma-separated further focus columns")
    p.add_argument("--aux", default="", help="comma-separated auxiliary columns (subject to selection)")
    p.add_argument("--intercept", action="store_true", help="add an all-ones focus column")
    p.add_argument("--intercept-columns", default="",
                   help="comma-separated focus columns already holding an intercept")
    p.add_argument("--standardize", action="store_true",
                   help="standardise covariates to mean 0 / variance 1")
    p.add_argument("--expand", default="",
                   help="comma-separated auxiliary columns to expand quadratically")
    p.add_argument("--expand-order", choices=["std-expand-std", "std-expand", "expand-std"],
                   default="std-expand-std",
                   help="order of standardisation and expansion (default: standardise, expand, "
                        "standardise the new columns)")


def _add_solver(p):
    p.add_argument("--formulation", choices=["A", "B"], default="A")
    p.add_argument("--epsilon", default="exact", help="'exact', 'rule' or a number")
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--param-bound", type=float, default=10.0,
                   help="L in the parameter box [-L, L]^(k+p)")
    p.add_argument("--warm-start", action="store_true")
    p.add_argument("--tau", type=float, default=1.5)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--node-selection", choices=["best-bound", "depth-first"], default="best-bound")
    p.add_argument("--alpha", choices=["both", "+1", "-1"], default="both",
                   help="restrict the sign of the x0 coefficient")
    p.add_argument("--trace", help="write a per-node CSV trace to this path")


def build_parser():
    parser = _Parser(prog="prescience",
                     description="Best-subset maximum score prediction for binary outcomes.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a best-subset maximum score rule")
    _add_common(p), _add_data(p), _add_solver(p)
    p.add_argument("--q", type=int, help="cardinality bound (skips cross-validation)")
    p.add_argument("--q-candidates", type=_int_list, help="candidates for cross-validated q")
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("cv", help="cross-validate the cardinality bound")
    _add_common(p), _add_data(p), _add_solver(p)
    p.add_argument("--q-candidates", type=_int_list, default=[1, 2, 3])
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("simulate", help="Monte Carlo experiment")
    _add_common(p)
    p.add_argument("--variant", choices=["I", "II"], default="I")
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--n-valid", type=int, default=5000)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--methods", default="PRESCIENCE(1),PRESCIENCE(2),PRESCIENCE(3),PRE_CV")
    p.add_argument("--q-candidates", type=_int_list, default=[1, 2, 3])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--theta3", type=float)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--formulation", choices=["A", "B"], default="A")
    p.add_argument("--param-bound", type=float, default=10.0)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float)

    p = sub.add_parser("bounds", help="refined parameter bounds from the logit warm start")
    _add_common(p), _add_data(p)
    p.add_argument("--tau", type=float, default=1.5)
    p.add_argument("--param-bound", type=float, default=10.0)
    p.add_argument("--alpha", choices=["+1", "-1"], default="+1")

    p = sub.add_parser("oracle-check", help="certify the MIO solver against exhaustive search")
    _add_common(p)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--max-n", type=int, default=12)
    p.add_argument("--max-p", type=int, default=4)
    p.add_argument("--max-q", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.0)

    p = sub.add_parser("gen-synthetic", help="write a synthetic mode-choice style CSV")
    _add_common(p)
    p.add_argument("--n", type=int, default=842)
    p.add_argument("--file", default="synthetic.csv", help="file name inside the output directory")
    return parser


# -- config ------------------------------------------------------------------

def read_config(path):
    """Parse ``key = value`` lines; returns a dict keyed by argparse dest names."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser, argv):
    """Re-parse with config values as defaults so explicit flags still win."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        if key not in known or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for command {args.command}")
        action = known[key]
        if action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- helpers -------------------------------------------------------------------

def _setup_logging(level):
    lvl = {"info": logging.INFO, "debug": logging.DEBUG, "trace": TRACE}[level]
    logging.basicConfig(stream=sys.stderr, level=lvl, format="%(levelname)s %(name)s: %(message)s",
                        force=True)


def _load(args) -> Dataset:
    if not args.data:
        raise UsageError("--data is required")
    if not args.x0:
        raise UsageError("--x0 is required")
    schema = Schema(outcome=args.outcome, x0=args.x0, focus=tuple(_csv_list(args.focus)),
                    auxiliary=tuple(_csv_list(args.aux)), add_intercept=args.intercept,
                    intercept_columns=tuple(_csv_list(args.intercept_columns)))
    d = load_csv(args.data, schema)
    base = _csv_list(args.expand)
    if base:
        order = args.expand_order
        if args.standardize and order in ("std-expand-std", "std-expand"):
            d = standardize(d)
        old = set(d.column_names)
        d = quadratic_expand(d, base)
        if args.standardize and order == "std-expand-std":
            d = standardize(d, [c for c in d.column_names if c not in old])
        elif args.standardize and order == "expand-std":
            d = standardize(d)
    elif args.standardize:
        d = standardize(d)
    return d


def _mio_cfg(args, q=0):
    alphas = {"both": (1, -1), "+1": (1,), "-1": (-1,)}[args.alpha]
    return MioConfig(formulation=Formulation(args.formulation), q=q, delta=args.delta,
                     node_limit=args.node_limit, time_limit=args.time_limit,
                     node_selection=args.node_selection, alphas=alphas, trace_path=args.trace)


def _epsilon_mode(text):
    if text in ("exact", "rule"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"--epsilon must be 'exact', 'rule' or a number, got {text!r}")
    if v < 0:
        raise UsageError("--epsilon must be non-negative")
    return v


def _write_manifest(outdir, args, t0, extra=None):
    manifest = {
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "seed": getattr(args, "seed", None),
        "versions": {"prescience": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "rng": RNG_DESCRIPTION,
        "wall_seconds": round(time.perf_counter() - t0, 3),
    }
    if extra:
        manifest.update(extra)
    (Path(outdir) / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _outdir(args):
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _limit_hit(status):
    return status in (SolveStatus.NODE_LIMIT, SolveStatus.TIME_LIMIT)


# -- commands ------------------------------------------------------------------

def cmd_fit(args, t0):
    d = _load(args)
    if args.q is not None and args.q_candidates:
        raise UsageError("give either --q or --q-candidates, not both")
    cands = [args.q] if args.q is not None else (args.q_candidates or [min(1, d.p)])
    spec = FitSpec(q_candidates=cands, K=args.folds, epsilon_mode=_epsilon_mode(args.epsilon),
                   warm_start=args.warm_start, tau=args.tau, seed=args.seed,
                   mio=_mio_cfg(args), threads=args.threads)
    box = ParamBox.cube(d.k, d.p, args.param_bound)
    report = fit(d, spec, box)
    out = _outdir(args)
    (out / "fit.json").write_text(report.to_json() + "\n")
    r = report.to_dict()
    print(f"alpha={r['alpha']:+d} q={r['q']} score={r['score']:.6f} gap={r['mio_gap']:.6f} "
          f"status={r['status']} nodes={r['nodes']}")
    print("focus:", ", ".join(f"{n}={v:.6g}" for n, v in zip(r["focus_names"], r["beta"])))
    print("selected:", ", ".join(f"{r['auxiliary_names'][j]}={r['gamma'][j]:.6g}"
                                 for j in r["selected_indices"]) or "(none)")
    _write_manifest(out, args, t0)
    return EXIT_LIMIT if _limit_hit(report.result.status) else EXIT_OK


def cmd_cv(args, t0):
    d = _load(args)
    spec = FitSpec(q_candidates=args.q_candidates, K=args.folds,
                   epsilon_mode=_epsilon_mode(args.epsilon), warm_start=args.warm_start,
                   tau=args.tau, seed=args.seed, mio=_mio_cfg(args), threads=args.threads)
    if any(q > d.p for q in spec.q_candidates):
        raise UsageError(f"q candidates must not exceed p={d.p}")
    box = ParamBox.cube(d.k, d.p, args.param_bound)
    cv = cross_validate_q(d, spec, box)
    out = _outdir(args)
    with (out / "cv.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "mean_score", *[f"fold_{i}" for i in range(len(cv.fold_scores[spec.q_candidates[0]]))]])
        for q, m in cv.table():
            w.writerow([q, f"{m:.6f}", *(f"{s:.6f}" for s in cv.fold_scores[q])])
    print(f"q_star={cv.q_star}")
    for q, m in cv.table():
        print(f"q={q} mean_score={m:.6f}")
    _write_manifest(out, args, t0, {"q_star": cv.q_star})
    return EXIT_OK


def cmd_simulate(args, t0):
    spec = DgpSpec(variant=args.variant, p=args.p, n_train=args.n, n_valid=args.n_valid,
                   reps=args.reps, seed=args.seed, theta3_star=args.theta3, rho=args.rho)
    cfg = MioConfig(formulation=Formulation(args.formulation), node_limit=args.node_limit,
                    time_limit=args.time_limit)
    methods = _csv_list(args.methods)
    try:
        res = run_experiment(spec, methods, cfg, q_candidates=args.q_candidates,
                             folds=args.folds, bound=args.param_bound, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = _outdir(args)
    res.write(out)
    sys.stdout.write(res.metrics_csv())
    _write_manifest(out, args, t0)
    limited = any(o.status in ("NodeLimit", "TimeLimit") for v in res.outcomes.values() for o in v)
    return EXIT_LIMIT if limited else EXIT_OK


def cmd_bounds(args, t0):
    d = _load(args)
    box = ParamBox.cube(d.k, d.p, args.param_bound)
    alpha = int(args.alpha)
    lf = fit_logit(d)
    r = tighten_bounds(d, alpha, box, lf.fitted_probabilities, args.tau)
    out = _outdir(args)
    names = list(d.focus_names) + list(d.aux_names)
    with (out / "bounds.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "lower", "upper", "l_hat", "u_hat"])
        for j, name in enumerate(names):
            if r.feasible:
                w.writerow([name, f"{r.box.lower[j]:.4f}", f"{r.box.upper[j]:.4f}",
                            f"{r.l_hat[j]:.4f}", f"{r.u_hat[j]:.4f}"])
            else:
                w.writerow([name, f"{box.lower[j]:.4f}", f"{box.upper[j]:.4f}", "", ""])
    ratio = r.box.volume() / box.volume() if r.feasible else 1.0
    if r.feasible:
        print(f"refined volume is {100 * ratio:.4g}% of the original box ({r.lp_calls} LPs)")
    else:
        print("sign restrictions infeasible; the original box is kept")
    _write_manifest(out, args, t0, {"feasible": r.feasible, "volume_ratio": ratio,
                                    "lp_calls": r.lp_calls})
    return EXIT_OK


def certification_instance(rng, max_n=12, max_p=4, max_q=2):
    """A random small instance: continuous x0, optional intercept, a few auxiliaries."""
    n = int(rng.integers(6, max_n + 1))
    k = int(rng.integers(0, 2))
    p = int(rng.integers(1, max_p + 1))
    q = int(rng.integers(0, min(max_q, p) + 1))
    x0 = rng.standard_normal(n)
    z = rng.standard_normal((n, p))
    coef = rng.standard_normal(p)
    y = (x0 + z @ coef * 0.7 + 0.6 * rng.standard_normal(n) >= 0).astype(float)
    names = ("x0", *(["intercept"] if k else []), *[f"z{j + 1}" for j in range(p)])
    d = Dataset(y, x0, np.ones((n, k)), z, names, intercept={"intercept"} if k else set())
    return d, q


def cmd_oracle_check(args, t0):
    rng = np.random.default_rng(args.seed)
    out = _outdir(args)
    failures = 0
    rows = []
    for i in range(args.instances):
        d, q = certification_instance(rng, args.max_n, args.max_p, args.max_q)
        box = ParamBox.cube(d.k, d.p, 10.0)
        o = exact_max_score(d, box, q)
        line = [i, d.n, d.k, d.p, q, f"{o.best_score:.6f}"]
        ok = True
        for form in ("A", "B"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                r = solve_prescience(d, box, MioConfig(formulation=form, q=q, epsilon=args.epsilon))
            if args.epsilon == 0:
                good = r.score == o.best_score
            else:
                good = r.score >= o.best_score - args.epsilon - 1e-12 and r.mio_gap <= args.epsilon + 1e-12
            good = good and l0_norm(r.coefficients.gamma) <= q
            ok &= good
            line.append(f"{r.score:.6f}")
        failures += not ok
        line.append("pass" if ok else "FAIL")
        rows.append(line)
        print(f"instance {i:3d} n={d.n:2d} k={d.k} p={d.p} q={q} oracle={line[5]} "
              f"A={line[6]} B={line[7]} {line[8]}")
    with (out / "oracle_check.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "n", "k", "p", "q", "oracle", "score_A", "score_B", "result"])
        w.writerows(rows)
    print(f"{args.instances - failures}/{args.instances} passed")
    _write_manifest(out, args, t0, {"failures": failures})
    return EXIT_OK if failures == 0 else EXIT_INTERNAL


def synthetic_mode_choice(n, seed):
    """Synthetic commute-mode data with columns y, DCOST, CARS, DOVTT, DIVTT.

    DCOST ~ N(0.6, 1.2^2) dollars, CARS ~ Binomial(3, 0.5), DOVTT ~ N(12, 9^2)
    and DIVTT ~ N(6, 11^2) minutes.  With s(.) denoting standardisation,
    y = 1 if s(DCOST) + 1.3 s(CARS) + 0.5 s(DOVTT) + 0.2 s(DIVTT)
    - 0.3 s(CARS) s(DOVTT) + 0.4 * logistic noise >= 0, else 0.
    """
    rng = np.random.default_rng(seed)
    dcost = rng.normal(0.6, 1.2, n)
    cars = rng.binomial(3, 0.5, n).astype(float)
    dovtt = rng.normal(12.0, 9.0, n)
    divtt = rng.normal(6.0, 11.0, n)

    def s(v):
        return (v - v.mean()) / v.std(ddof=1)

    u = s(dcost) + 1.3 * s(cars) + 0.5 * s(dovtt) + 0.2 * s(divtt) - 0.3 * s(cars) * s(dovtt)
    y = (u + 0.4 * rng.logistic(size=n) >= 0).astype(int)
    return y, dcost, cars, dovtt, divtt


def cmd_gen_synthetic(args, t0):
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    out = _outdir(args)
    y, dcost, cars, dovtt, divtt = synthetic_mode_choice(args.n, args.seed)
    path = out / args.file
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "DCOST", "CARS", "DOVTT", "DIVTT"])
        for row in zip(y, dcost, cars, dovtt, divtt):
            w.writerow([int(row[0]), *(f"{v:.6f}" for v in row[1:])])
    print(path)
    _write_manifest(out, args, t0)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "cv": cmd_cv, "simulate": cmd_simulate, "bounds": cmd_bounds,
            "oracle-check": cmd_oracle_check, "gen-synthetic": cmd_gen_synthetic}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:  # --help, --version or an argparse usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"prescience: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _setup_logging(args.log_level)
    if getattr(args, "threads", 1) < 1:
        print("prescience: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        return COMMANDS[args.command](args, t0)
    except UsageError as exc:
        print(f"prescience: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, ParseError, DegenerateColumnError, FileNotFoundError) as exc:
        print(f"prescience: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ContractError, ValueError) as exc:
        print(f"prescience: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrescienceError as exc:
        print(f"prescience: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        print(f"prescience: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
