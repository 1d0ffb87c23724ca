"""Exhaustive exact maximiser for small instances, used to certify the MIO solver.

For each alpha and each auxiliary subset of size <= q, prediction patterns are
visited in decreasing score order and tested for realisability with an LP
feasibility problem.  The realisability test uses the same delta margin as
the MIO: a point predicted 1 needs index >= 0, a point predicted 0 needs
index <= -delta.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import SizeError
from .lp import LinearProgram, LpStatus, solve_lp
from .score import Coefficients, ParamBox

MAX_N = 14
MAX_P = 5


@dataclass
class OracleResult:
    best_score: float
    witness: Coefficients
    patterns_checked: int


def _realise(W, a, lo, hi, pred, delta, margin):
    pos = pred == 1
    neg = ~pos
    if W.shape[1] == 0:
        ok = np.all(a[pos] >= margin) and np.all(a[neg] <= -delta)
        return np.zeros(0) if ok else None
    rows = np.vstack([W[pos], W[neg]])
    rhs = np.concatenate([-a[pos] + margin, -a[neg] - delta])
    senses = [">="] * int(pos.sum()) + ["<="] * int(neg.sum())
    out = solve_lp(LinearProgram(np.zeros(W.shape[1]), rows, senses, rhs, lo, hi))
    return out.x if out.status is LpStatus.OPTIMAL else None


def exact_max_score(d: Dataset, box: ParamBox, q: int, delta: float = 1e-6,
                    alphas=(1, -1)) -> OracleResult:
    if d.n > MAX_N or d.p > MAX_P:
        raise SizeError(f"oracle limited to n <= {MAX_N}, p <= {MAX_P} (got n={d.n}, p={d.p})")
    if q < 0 or q > d.p:
        raise ValueError("q must lie in [0, p]")
    n, k, p = d.n, d.k, d.p
    y = d.y.astype(int)
    best = -1
    witness = None
    checked = 0
    subsets = [m for size in range(q + 1) for m in itertools.combinations(range(p), size)]
    for alpha in alphas:
        a = alpha * d.x0
        for m in subsets:
            cols = list(m)
            W = np.hstack([d.x_tilde, d.z[:, cols]])
            lo = np.concatenate([box.beta_bounds[:, 0], box.gamma_bounds[cols, 0]])
            hi = np.concatenate([box.beta_bounds[:, 1], box.gamma_bounds[cols, 1]])
            # only patterns that beat the best so far can change the answer
            for wrong in range(0, n - best):
                hit = None
                for errs in itertools.combinations(range(n), wrong):
                    pred = y.copy()
                    pred[list(errs)] = 1 - pred[list(errs)]
                    checked += 1
                    t = _realise(W, a, lo, hi, pred, delta, 0.0)
                    if t is not None:
                        hit = (pred, t)
                        break
                if hit is not None:
                    pred, t = hit
                    # prefer a witness strictly inside the prediction regions
                    t2 = _realise(W, a, lo, hi, pred, delta, delta / 2)
                    t = t if t2 is None else t2
                    gamma = np.zeros(p)
                    gamma[cols] = t[k:]
                    best = n - wrong
                    witness = Coefficients(alpha, t[:k], gamma)
                    break
    return OracleResult(best / n, witness, checked)
