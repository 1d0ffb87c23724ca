"""Tolerance rule, cross-validated choice of q, and the end-to-end fit."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Optional, Sequence, Union

import numpy as np

from .data import Dataset, split_folds
from .errors import PrescienceError
from .mio import MioConfig, SolveResult, solve_prescience
from .parallel import ordered_map
from .score import ParamBox, SELECTION_TOL, empirical_score, l0_norm
from .warmstart import warm_start

log = logging.getLogger(__name__)


def epsilon_rule(n: int, p: int) -> float:
    """min(0.05, 0.5 * sqrt(ln(max(p, n)) / n))."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return min(0.05, 0.5 * math.sqrt(math.log(max(p, n)) / n))


EpsilonMode = Union[str, float]


def resolve_epsilon(mode: EpsilonMode, n: int, p: int) -> float:
    """``"exact"`` -> 0, ``"rule"`` -> :func:`epsilon_rule`, a number -> itself."""
    if mode == "exact":
        return 0.0
    if mode == "rule":
        return epsilon_rule(n, p)
    value = float(mode)
    if value < 0:
        raise ValueError("epsilon must be non-negative")
    return value


@dataclass
class FitSpec:
    q_candidates: Sequence[int] = (1, 2, 3)
    K: int = 5
    epsilon_mode: EpsilonMode = "exact"
    warm_start: bool = False
    tau: float = 1.5
    seed: int = 0
    mio: MioConfig = field(default_factory=MioConfig)
    threads: int = 1

    def __post_init__(self):
        self.q_candidates = tuple(int(q) for q in self.q_candidates)
        if not self.q_candidates:
            raise ValueError("q_candidates must be non-empty")
        if any(q < 0 for q in self.q_candidates):
            raise ValueError("q candidates must be non-negative")


def _solve(d: Dataset, box: ParamBox, spec: FitSpec, q: int, trace=False):
    eps = resolve_epsilon(spec.epsilon_mode, d.n, d.p)
    cfg = replace(spec.mio, q=q, epsilon=eps)
    if not trace:
        cfg = replace(cfg, trace_path=None)
    boxes = None
    ws = None
    if spec.warm_start:
        ws = warm_start(d, box, cfg.alphas, spec.tau)
        boxes = {a: w.box for a, w in ws.items()}
    return solve_prescience(d, box, cfg, boxes=boxes), ws


def _degenerate(d: Dataset) -> Optional[str]:
    for j, name in enumerate(d.column_names):
        if name in d.intercept:
            continue
        col = d.x0 if j == 0 else (d.x_tilde[:, j - 1] if j <= d.k else d.z[:, j - 1 - d.k])
        if d.n < 2 or np.all(col == col[0]):
            return name
    return None


def _cv_job(job, d, spec, box):
    fold, q, train_idx, test_idx = job
    train = d.subset(train_idx)
    res, _ = _solve(train, box, spec, q)
    if res.coefficients is None:
        return fold, q, math.nan
    return fold, q, empirical_score(res.coefficients, d.subset(test_idx))


@dataclass
class CvResult:
    q_star: int
    mean_scores: dict
    fold_scores: dict
    skipped_folds: tuple = ()

    def table(self):
        return [(q, self.mean_scores[q]) for q in sorted(self.mean_scores)]


def cross_validate_q(d: Dataset, spec: FitSpec, box: ParamBox) -> CvResult:
    """K-fold held-out score for each candidate q; ties go to the smallest q."""
    folds = split_folds(d.n, spec.K, spec.seed)
    jobs = []
    skipped = []
    for f in range(spec.K):
        train_idx, test_idx = folds.train_test(f)
        bad = _degenerate(d.subset(train_idx))
        if bad is not None:
            warnings.warn(f"fold {f} skipped: column {bad!r} is constant on its training part",
                          stacklevel=2)
            skipped.append(f)
            continue
        for q in spec.q_candidates:
            jobs.append((f, q, train_idx, test_idx))
    if len(skipped) == spec.K:
        raise PrescienceError("every cross-validation fold was skipped")
    results = ordered_map(partial(_cv_job, d=d, spec=spec, box=box), jobs, spec.threads)
    fold_scores = {q: [] for q in spec.q_candidates}
    for _, q, s in results:
        fold_scores[q].append(s)
    means = {q: float(np.mean(v)) for q, v in fold_scores.items()}
    q_star = None
    for q in sorted(spec.q_candidates):
        if q_star is None or means[q] > means[q_star] + 1e-12:
            q_star = q
    return CvResult(q_star, means, fold_scores, tuple(skipped))


@dataclass
class FitReport:
    q: int
    result: SolveResult
    column_names: tuple
    cv: Optional[CvResult] = None
    warmstart: Optional[dict] = None
    epsilon: float = 0.0

    @property
    def selected_indices(self):
        g = self.result.coefficients.gamma
        return [int(j) for j in np.flatnonzero(np.abs(g) > SELECTION_TOL)]

    def to_dict(self):
        c = self.result.coefficients
        aux = self.column_names[1 + len(c.beta):]
        ws = {"used": False, "feasible": False, "volume_ratio": 1.0}
        if self.warmstart:
            w = self.warmstart[c.alpha]
            ws = {"used": w.used, "feasible": w.feasible, "volume_ratio": w.volume_ratio,
                  "per_alpha": {str(a): {"used": v.used, "feasible": v.feasible,
                                         "volume_ratio": v.volume_ratio}
                                for a, v in self.warmstart.items()}}
        return {
            "alpha": c.alpha,
            "beta": [float(v) for v in c.beta],
            "gamma": [float(v) for v in c.gamma],
            "selected_indices": self.selected_indices,
            "selected_names": [aux[j] for j in self.selected_indices],
            "focus_names": list(self.column_names[1:1 + len(c.beta)]),
            "auxiliary_names": list(aux),
            "q": self.q,
            "epsilon": self.epsilon,
            "score": self.result.score,
            "mio_gap": self.result.mio_gap,
            "best_bound": self.result.best_bound,
            "status": self.result.status.value,
            "nodes": self.result.nodes_explored,
            "wall_seconds": self.result.wall_seconds,
            "cv_table": None if self.cv is None else [
                {"q": q, "mean_score": s} for q, s in self.cv.table()],
            "warmstart": ws,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, **kw)


def fit(d: Dataset, spec: FitSpec, box: ParamBox) -> FitReport:
    """Choose q (by CV when several candidates are given) then solve on the full sample."""
    cv = None
    if d.p == 0:
        q = 0
    else:
        cands = [q for q in spec.q_candidates if q <= d.p]
        if not cands:
            raise ValueError(f"no q candidate is <= p={d.p}")
        if len(cands) > 1:
            cv = cross_validate_q(d, replace(spec, q_candidates=cands), box)
            q = cv.q_star
        else:
            q = cands[0]
    res, ws = _solve(d, box, spec, q, trace=True)
    if res.coefficients is None:
        raise PrescienceError(f"solver returned no feasible rule (status {res.status.value})")
    if l0_norm(res.coefficients.gamma) > q:
        raise PrescienceError("solver violated the cardinality bound")
    eps = resolve_epsilon(spec.epsilon_mode, d.n, d.p)
    return FitReport(q, res, d.column_names, cv, ws, eps)
