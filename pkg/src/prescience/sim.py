"""Monte Carlo harness for the two simulation designs.

Design: V ~ N(0, Sigma) with Sigma_ij = rho^|i-j| over p+1 coordinates,
x0 = V_1, x_tilde = 1, z = (V_2, ..., V_{p+1}) and
Y = 1{x0 + theta3 * z_1 >= sigma(W) xi}, xi ~ N(0, 1).
Variant I uses sigma = 0.25; variant II uses
sigma = 0.25 (1 + 2 (V_1 + V_2)^2 + (V_1 + V_2)^4).

Randomness: one ``numpy.random.SeedSequence(seed)`` spawns an independent
PCG64 stream per repetition, so serial and parallel runs draw the same data.
Normals come from numpy's ziggurat sampler.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .data import Dataset
from .lp import cholesky
from .mio import MioConfig, solve_prescience
from .parallel import ordered_map
from .score import Coefficients, ParamBox, SELECTION_TOL, empirical_score
from .selection import FitSpec, cross_validate_q, epsilon_rule

RNG_DESCRIPTION = "numpy PCG64, SeedSequence.spawn per repetition, ziggurat normals"

METRIC_COLUMNS = ("Corr_sel", "Orac_sel", "Num_irrel", "in_Score", "in_RS", "out_Score", "out_RS")


@dataclass
class DgpSpec:
    variant: str = "I"
    p: int = 10
    n_train: int = 100
    n_valid: int = 5000
    reps: int = 100
    seed: int = 0
    theta3_star: Optional[float] = None
    rho: float = 0.25
    sigma_scale: float = 1.0

    def __post_init__(self):
        self.variant = str(self.variant).upper()
        if self.variant not in ("I", "II"):
            raise ValueError("variant must be I or II")
        if self.p < 1 or self.reps < 1:
            raise ValueError("p and reps must be at least 1")
        if self.theta3_star is None:
            self.theta3_star = -0.35 if self.variant == "I" else -1.5

    def covariance(self) -> np.ndarray:
        i = np.arange(self.p + 1)
        return self.rho ** np.abs(np.subtract.outer(i, i))

    def theta_star(self) -> Coefficients:
        gamma = np.zeros(self.p)
        gamma[0] = self.theta3_star
        return Coefficients(1, np.zeros(1), gamma)


def _column_names(p):
    return ("X0", "intercept", *[f"Z{j + 1}" for j in range(p)])


def _draw(spec: DgpSpec, L, rng, n):
    V = rng.standard_normal((n, spec.p + 1)) @ L.T
    xi = rng.standard_normal(n)
    if spec.variant == "I":
        sigma = np.full(n, 0.25)
    else:
        s = V[:, 0] + V[:, 1]
        sigma = 0.25 * (1 + 2 * s ** 2 + s ** 4)
    sigma = sigma * spec.sigma_scale
    x0 = V[:, 0]
    z = V[:, 1:]
    index = x0 + spec.theta3_star * z[:, 0]
    y = (index >= sigma * xi).astype(float)
    return Dataset(y, x0, np.ones((n, 1)), z, _column_names(spec.p), intercept={"intercept"})


def sample_dataset(spec: DgpSpec, rng: np.random.Generator):
    """Training sample, validation sample and the true coefficients."""
    L = cholesky(spec.covariance())
    train = _draw(spec, L, rng, spec.n_train)
    valid = _draw(spec, L, rng, spec.n_valid)
    return train, valid, spec.theta_star()


@dataclass
class MetricsSummary:
    corr_sel: float
    orac_sel: float
    num_irrel: float
    in_score: float
    in_rs: float
    out_score: float
    out_rs: float

    def row(self):
        return (self.corr_sel, self.orac_sel, self.num_irrel, self.in_score,
                self.in_rs, self.out_score, self.out_rs)


def compute_metrics(fits: Sequence[Coefficients], theta_star: Coefficients,
                    trains: Sequence[Dataset], valids: Sequence[Dataset]) -> MetricsSummary:
    """Selection and score metrics averaged over repetitions (Z_1 is the relevant covariate)."""
    corr = orac = irrel = 0.0
    ins, inrs, outs, outrs = [], [], [], []
    for c, tr, va in zip(fits, trains, valids):
        sel = np.abs(c.gamma) > SELECTION_TOL
        corr += sel[0]
        orac += bool(sel[0] and not sel[1:].any())
        irrel += int(sel[1:].sum())
        s_in, s_in_star = empirical_score(c, tr), empirical_score(theta_star, tr)
        s_out, s_out_star = empirical_score(c, va), empirical_score(theta_star, va)
        ins.append(s_in)
        inrs.append(s_in / s_in_star)
        outs.append(s_out)
        outrs.append(s_out / s_out_star)
    r = len(fits)
    return MetricsSummary(corr / r, orac / r, irrel / r, float(np.mean(ins)), float(np.mean(inrs)),
                          float(np.mean(outs)), float(np.mean(outrs)))


@dataclass
class MethodOutcome:
    coefficients: Coefficients
    seconds: float
    nodes: int
    status: str
    q: int


def _prescience(q, train, box, ctx) -> MethodOutcome:
    cfg = replace(ctx["mio"], q=q, epsilon=ctx["epsilon"](train))
    res = solve_prescience(train, box, cfg)
    return MethodOutcome(res.coefficients, res.wall_seconds, res.nodes_explored, res.status.value, q)


def _pre_cv(train, box, ctx) -> MethodOutcome:
    t0 = time.perf_counter()
    eps_mode = "rule" if train.p >= train.n else "exact"
    spec = FitSpec(q_candidates=ctx["q_candidates"], K=ctx["folds"], epsilon_mode=eps_mode,
                   seed=ctx["cv_seed"], mio=ctx["mio"])
    cv = cross_validate_q(train, spec, box)
    out = _prescience(cv.q_star, train, box, ctx)
    return MethodOutcome(out.coefficients, time.perf_counter() - t0, out.nodes, out.status, cv.q_star)


def method_registry(q_candidates=(1, 2, 3)) -> Dict[str, Callable]:
    """Name -> callable(train, box, ctx). Further methods can be added to the mapping."""
    reg = {f"PRESCIENCE({q})": partial(_prescience, q) for q in q_candidates}
    reg["PRE_CV"] = _pre_cv
    return reg


def parse_method(name: str) -> Callable:
    name = name.strip()
    if name == "PRE_CV":
        return _pre_cv
    if name.startswith("PRESCIENCE(") and name.endswith(")"):
        return partial(_prescience, int(name[len("PRESCIENCE("):-1]))
    raise ValueError(f"unknown method {name!r}")


@dataclass
class ExperimentResult:
    spec: DgpSpec
    methods: tuple
    metrics: Dict[str, MetricsSummary]
    outcomes: Dict[str, List[MethodOutcome]]

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", *METRIC_COLUMNS])
        for m in self.methods:
            w.writerow([m, *(f"{v:.6f}" for v in self.metrics[m].row())])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "mean", "min", "median", "max", "mean_nodes"])
        for m in self.methods:
            t = np.array([o.seconds for o in self.outcomes[m]])
            nodes = np.mean([o.nodes for o in self.outcomes[m]])
            w.writerow([m, *(f"{v:.4f}" for v in (t.mean(), t.min(), np.median(t), t.max())),
                        f"{nodes:.2f}"])
        return buf.getvalue()

    def reps_csv(self) -> str:
        """Per-repetition detail; deterministic (no timings)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", "method", "q", "status", "nodes", "selected", "beta", "gamma"])
        for m in self.methods:
            for r, o in enumerate(self.outcomes[m]):
                sel = ";".join(str(j + 1) for j in np.flatnonzero(np.abs(o.coefficients.gamma) > SELECTION_TOL))
                w.writerow([r, m, o.q, o.status, o.nodes, sel,
                            ";".join(f"{v:.10g}" for v in o.coefficients.beta),
                            ";".join(f"{v:.10g}" for v in o.coefficients.gamma)])
        return buf.getvalue()

    def write(self, outdir) -> dict:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        files = {"metrics": outdir / "metrics.csv", "timing": outdir / "timing.csv",
                 "reps": outdir / "reps.csv"}
        files["metrics"].write_text(self.metrics_csv())
        files["timing"].write_text(self.timing_csv())
        files["reps"].write_text(self.reps_csv())
        return files


def _run_rep(rep_seed, spec, methods, ctx):
    rng = np.random.Generator(np.random.PCG64(rep_seed))
    train, valid, theta = sample_dataset(spec, rng)
    box = ParamBox.cube(1, spec.p, ctx["bound"])
    rep_ctx = dict(ctx, cv_seed=int(rep_seed.generate_state(1)[0]))
    outs = {m: parse_method(m)(train, box, rep_ctx) for m in methods}
    return train, valid, theta, outs


def run_experiment(spec: DgpSpec, methods: Sequence[str], mio_cfg: Optional[MioConfig] = None,
                   q_candidates=(1, 2, 3), folds: int = 5, bound: float = 10.0,
                   threads: int = 1) -> ExperimentResult:
    """Fresh train/validation draws per repetition, every method fit on the training part.

    The parameter space fixes alpha = 1 with (beta, gamma) in [-bound, bound]^{p+1}.
    Exact solves are used when p < n, otherwise the tolerance rule.
    """
    methods = tuple(methods)
    for m in methods:
        parse_method(m)
    if mio_cfg is None:
        mio_cfg = MioConfig()
    mio_cfg = replace(mio_cfg, alphas=(1,), trace_path=None)

    ctx = {"mio": mio_cfg, "epsilon": _Eps(), "q_candidates": tuple(q_candidates),
           "folds": folds, "bound": bound}
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.reps)
    results = ordered_map(partial(_run_rep, spec=spec, methods=methods, ctx=ctx), seeds, threads)
    outcomes = {m: [r[3][m] for r in results] for m in methods}
    trains = [r[0] for r in results]
    valids = [r[1] for r in results]
    theta = results[0][2]
    metrics = {m: compute_metrics([o.coefficients for o in outcomes[m]], theta, trains, valids)
               for m in methods}
    return ExperimentResult(spec, methods, metrics, outcomes)


class _Eps:
    """Picklable tolerance choice: exact when p < n, the rule otherwise."""

    def __call__(self, train):
        return epsilon_rule(train.n, train.p) if train.p >= train.n else 0.0
