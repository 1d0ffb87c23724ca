"""Branch-and-bound over the two big-M formulations of best-subset score maximisation.

Variable layout shared by both formulations::

    [ beta (k) | gamma (p) | d (n) | e (p) ]

The binaries ``v = (d, e)`` occupy one index space (d first), which is the
space the branching rule works in.
"""

from __future__ import annotations

import csv
import enum
import heapq
import itertools
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import Dataset
from .errors import ContractError
from .lp import LinearProgram, LpStatus, solve_lp
from .score import Coefficients, ParamBox, compute_big_m, empirical_score, index_values

log = logging.getLogger(__name__)
TRACE = 5  # node-level messages; below DEBUG

INTEGRALITY_TOL = 1e-6
PRUNE_TOL = 1e-9


class Formulation(str, enum.Enum):
    A = "A"   # dichotomisation constraints, objective sum (1-y) + (2y-1) d
    B = "B"   # sign-matching constraints, objective sum d


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    GAP_REACHED = "GapReached"
    NODE_LIMIT = "NodeLimit"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass
class MioConfig:
    formulation: Formulation = Formulation.A
    q: int = 0
    delta: float = 1e-6
    epsilon: float = 0.0
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    node_selection: str = "best-bound"
    alphas: Sequence[int] = (1, -1)
    heuristic: bool = True
    trace_path: Optional[str] = None

    def __post_init__(self):
        self.formulation = Formulation(self.formulation)
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.node_selection not in ("best-bound", "depth-first"):
            raise ValueError(f"unknown node selection {self.node_selection!r}")
        if not self.alphas or any(a not in (1, -1) for a in self.alphas):
            raise ValueError("alphas must be a non-empty subset of {1, -1}")


@dataclass
class MioProblem:
    formulation: Formulation
    lp: LinearProgram
    data: Dataset
    alpha: int
    box: ParamBox
    big_m: np.ndarray
    q: int
    delta: float
    objective_constant: float

    @property
    def n(self):
        return self.data.n

    @property
    def k(self):
        return self.data.k

    @property
    def p(self):
        return self.data.p

    @property
    def binary_offset(self):
        return self.k + self.p

    @property
    def num_binaries(self):
        return self.n + self.p


@dataclass
class SolveResult:
    coefficients: Optional[Coefficients]
    score: float
    best_bound: float
    mio_gap: float
    nodes_explored: int
    status: SolveStatus
    wall_seconds: float
    indicators: Optional[np.ndarray] = None
    trajectory: list = field(default_factory=list, repr=False)


def _check_inputs(d: Dataset, alpha: int, box: ParamBox, cfg: MioConfig):
    if alpha not in (1, -1):
        raise ValueError("alpha must be +1 or -1")
    if box.k != d.k or box.p != d.p:
        raise ValueError("parameter box does not match dataset dimensions")
    if cfg.q > d.p:
        raise ContractError(f"q={cfg.q} exceeds the number of auxiliary covariates p={d.p}")


def _common_blocks(d, alpha, box, cfg, big_m):
    if big_m is None:
        big_m = compute_big_m(d, alpha, box)
    big_m = np.asarray(big_m, dtype=float)
    if not np.all(np.isfinite(big_m)):
        raise ContractError("big-M values must be finite")
    n, k, p = d.n, d.k, d.p
    nv = k + p + n + p
    lower = np.concatenate([box.lower, np.zeros(n + p)])
    upper = np.concatenate([box.upper, np.ones(n + p)])
    W = np.hstack([d.x_tilde, d.z])
    # selection: gamma_j - hi_j e_j <= 0 and gamma_j - lo_j e_j >= 0
    sel = np.zeros((2 * p, nv))
    for j in range(p):
        sel[2 * j, k + j] = 1.0
        sel[2 * j, k + p + n + j] = -box.gamma_bounds[j, 1]
        sel[2 * j + 1, k + j] = 1.0
        sel[2 * j + 1, k + p + n + j] = -box.gamma_bounds[j, 0]
    card = np.zeros((1, nv))
    card[0, k + p + n:] = 1.0
    tail_rows = np.vstack([sel, card])
    tail_senses = ["<=", ">="] * p + ["<="]
    tail_rhs = np.concatenate([np.zeros(2 * p), [cfg.q]])
    return big_m, W, lower, upper, tail_rows, tail_senses, tail_rhs


def build_formulation_a(d: Dataset, alpha: int, box: ParamBox, cfg: MioConfig,
                        big_m=None) -> MioProblem:
    """Formulation with d_i tied to the sign of the index through a delta margin:
    ``(d_i - 1) M_i <= idx_i <= d_i (M_i + delta) - delta``."""
    _check_inputs(d, alpha, box, cfg)
    big_m, W, lower, upper, tail, tail_s, tail_b = _common_blocks(d, alpha, box, cfg, big_m)
    n, k, p = d.n, d.k, d.p
    nv = k + p + n + p
    a = alpha * d.x0
    rows = np.zeros((2 * n, nv))
    rows[0::2, :k + p] = W
    rows[1::2, :k + p] = W
    rows[0::2, k + p:k + p + n] = -np.diag(big_m)
    rows[1::2, k + p:k + p + n] = -np.diag(big_m + cfg.delta)
    rhs = np.empty(2 * n)
    rhs[0::2] = -big_m - a
    rhs[1::2] = -cfg.delta - a
    senses = [">=", "<="] * n
    c = np.zeros(nv)
    c[k + p:k + p + n] = (2 * d.y - 1) / n
    lp = LinearProgram(c, np.vstack([rows, tail]), senses + tail_s,
                       np.concatenate([rhs, tail_b]), lower, upper)
    return MioProblem(Formulation.A, lp, d, alpha, box, big_m, cfg.q, cfg.delta,
                      float((1 - d.y).sum() / n))


def build_formulation_b(d: Dataset, alpha: int, box: ParamBox, cfg: MioConfig,
                        big_m=None) -> MioProblem:
    """Sign-matching formulation: ``(1 - 2 y_i) idx_i <= M_i (1 - d_i)``, objective sum d / n.

    Agrees with the dichotomised score only when the index has no ties at
    zero, so a warning is issued when x0 has repeated or zero values.
    """
    _check_inputs(d, alpha, box, cfg)
    x0 = d.x0
    if np.any(x0 == 0) or np.unique(x0).shape[0] < x0.shape[0]:
        warnings.warn("x0 has ties or zeros; formulation B may differ from the "
                      "dichotomised score on those observations", stacklevel=2)
    big_m, W, lower, upper, tail, tail_s, tail_b = _common_blocks(d, alpha, box, cfg, big_m)
    n, k, p = d.n, d.k, d.p
    nv = k + p + n + p
    s = 1 - 2 * d.y
    rows = np.zeros((n, nv))
    rows[:, :k + p] = s[:, None] * W
    rows[:, k + p:k + p + n] = np.diag(big_m)
    rhs = big_m - s * alpha * x0
    c = np.zeros(nv)
    c[k + p:k + p + n] = 1.0 / n
    lp = LinearProgram(c, np.vstack([rows, tail]), ["<="] * n + tail_s,
                       np.concatenate([rhs, tail_b]), lower, upper)
    return MioProblem(Formulation.B, lp, d, alpha, box, big_m, cfg.q, cfg.delta, 0.0)


def build_formulation(d, alpha, box, cfg, big_m=None) -> MioProblem:
    if cfg.formulation is Formulation.A:
        return build_formulation_a(d, alpha, box, cfg, big_m)
    return build_formulation_b(d, alpha, box, cfg, big_m)


# -- incumbent construction ------------------------------------------------

def _coefficients_for_pattern(prob: MioProblem, targets: np.ndarray, selected: np.ndarray):
    """Find (beta, gamma) realising ``targets`` (1, 0, or -1 = unconstrained).

    Points targeted at 1 get index >= eta, points targeted at 0 get index <= -delta.
    A margin eta = delta/2 is tried first so the returned point is not sitting on
    the prediction boundary.
    """
    d = prob.data
    k = d.k
    sel = np.flatnonzero(selected)
    W = np.hstack([d.x_tilde, d.z[:, sel]])
    lo = np.concatenate([prob.box.beta_bounds[:, 0], prob.box.gamma_bounds[sel, 0]])
    hi = np.concatenate([prob.box.beta_bounds[:, 1], prob.box.gamma_bounds[sel, 1]])
    a = prob.alpha * d.x0
    pos = targets == 1
    neg = targets == 0
    if W.shape[1] == 0:
        idx = a
        ok = np.all(idx[pos] >= 0) and np.all(idx[neg] <= -prob.delta)
        return (np.zeros(0), np.zeros(0)) if ok else None
    rows = np.vstack([W[pos], W[neg]])
    for eta in (prob.delta / 2, 0.0):
        rhs = np.concatenate([-a[pos] + eta, -a[neg] - prob.delta])
        senses = [">="] * int(pos.sum()) + ["<="] * int(neg.sum())
        lp = LinearProgram(np.zeros(W.shape[1]), rows, senses, rhs, lo, hi)
        out = solve_lp(lp)
        if out.status is LpStatus.OPTIMAL:
            beta = out.x[:k]
            gamma = np.zeros(d.p)
            gamma[sel] = out.x[k:]
            return beta, gamma
    return None


def _dichotomy_ok(idx, delta):
    # an index strictly inside (-delta, 0) is unreachable for the MIO; allow LP round-off at -delta
    return not np.any((idx > -delta + 1e-9) & (idx < 0.0))


class _Search:
    def __init__(self, prob: MioProblem, cfg: MioConfig, cutoff: Optional[float]):
        self.prob = prob
        self.cfg = cfg
        self.cutoff = -math.inf if cutoff is None else cutoff
        self.inc_score = -math.inf
        self.inc_coef = None
        self.inc_v = None
        self.nodes = 0
        self.trace_rows = []
        self.trajectory = []
        n = prob.n
        self.n = n
        self.off = prob.binary_offset
        self.nb = prob.num_binaries

    @property
    def level(self):
        return max(self.inc_score, self.cutoff)

    def round_bound(self, obj):
        return math.floor(self.n * (obj + self.prob.objective_constant) + 1e-6) / self.n

    def try_incumbent(self, beta, gamma):
        prob = self.prob
        coef = Coefficients(prob.alpha, beta, gamma)
        idx = index_values(coef, prob.data)
        if not _dichotomy_ok(idx, prob.delta):
            return False
        score = empirical_score(coef, prob.data)
        if score > self.inc_score + 1e-12:
            self.inc_score = score
            self.inc_coef = coef
            # binaries implied by the coefficients, so d matches the realised predictions
            pred = (idx >= 0).astype(float)
            dpart = pred if prob.formulation is Formulation.A else (pred == prob.data.y).astype(float)
            self.inc_v = np.concatenate([dpart, (np.abs(gamma) > 0).astype(float)])
            return True
        return False

    def heuristic(self, x):
        prob = self.prob
        k, p = prob.k, prob.p
        beta = x[:k].copy()
        gamma = x[k:k + p].copy()
        gamma[np.abs(gamma) <= 1e-9] = 0.0
        nz = np.flatnonzero(gamma)
        if nz.size > prob.q:
            scale = np.abs(gamma) * np.abs(prob.data.z).mean(axis=0)
            keep = nz[np.argsort(-scale[nz], kind="stable")[:prob.q]]
            mask = np.zeros(p, dtype=bool)
            mask[keep] = True
            gamma[~mask] = 0.0
        self.try_incumbent(beta, gamma)

    def integral(self, v):
        prob = self.prob
        n = prob.n
        vr = np.round(v)
        dpat = vr[:n]
        epat = vr[n:]
        if prob.formulation is Formulation.A:
            targets = dpat.astype(int)
        else:
            targets = np.where(dpat == 1, prob.data.y, -1).astype(int)
        found = _coefficients_for_pattern(prob, targets, epat == 1)
        if found is None:
            return False
        return self.try_incumbent(*found)

    def solve_node(self, lower, upper, basis):
        lp = replace(self.prob.lp, lower=lower, upper=upper)
        return solve_lp(lp, basis)


# memory budget for factorised bases kept on open nodes (restarts skip refactorisation)
TABLEAU_CACHE_BYTES = 256 * 2 ** 20


@dataclass(order=True)
class _Node:
    key: tuple
    bound: float = field(compare=False)
    depth: int = field(compare=False)
    lower: np.ndarray = field(compare=False, repr=False)
    upper: np.ndarray = field(compare=False, repr=False)
    basis: object = field(compare=False, repr=False)
    branch_var: int = field(compare=False)


def branch_and_bound(prob: MioProblem, cfg: MioConfig, cutoff: Optional[float] = None) -> SolveResult:
    """LP-based branch-and-bound with best-bound (default) or depth-first selection.

    Each evaluated relaxation falls into one of four cases: infeasible (pruned),
    bound not above the incumbent (pruned), integral binaries (incumbent update)
    or fractional (branch on the most fractional binary, lowest index on ties,
    zero child first).  ``cutoff`` is an externally known achievable score; nodes
    that cannot beat it are pruned.
    """
    t0 = time.perf_counter()
    s = _Search(prob, cfg, cutoff)
    seq = itertools.count()
    open_nodes: list = []
    best_first = cfg.node_selection == "best-bound"
    off = s.off
    status = None

    if cfg.heuristic and 0 <= prob.q:
        z = np.zeros(prob.k)
        zb = np.clip(z, prob.box.beta_bounds[:, 0], prob.box.beta_bounds[:, 1])
        if np.all(prob.box.gamma_bounds[:, 0] <= 0) and np.all(prob.box.gamma_bounds[:, 1] >= 0):
            s.try_incumbent(zb, np.zeros(prob.p))

    tracing = log.isEnabledFor(TRACE)
    # bound of the node whose children are being evaluated; still part of the frontier
    current = [-math.inf]

    def open_bound():
        if not open_nodes:
            return -math.inf
        if best_first:
            return open_nodes[0].bound
        return max(nd.bound for nd in open_nodes)

    def record(action, depth, bound):
        gb = max(open_bound(), s.level, current[0], bound if action == "branch" else -math.inf)
        s.trajectory.append((s.nodes, gb, s.inc_score))
        if cfg.trace_path is not None:
            s.trace_rows.append((s.nodes, depth, bound, s.inc_score, action))
        if tracing:
            log.log(TRACE, "node %d depth %d bound %.6g incumbent %.6g %s",
                    s.nodes, depth, bound, s.inc_score, action)

    def evaluate(lower, upper, basis, depth, parent_bound):
        s.nodes += 1
        out = s.solve_node(lower, upper, basis)
        if out.status is not LpStatus.OPTIMAL:
            record("infeasible", depth, math.nan)
            return None
        bound = min(s.round_bound(out.objective_value), parent_bound)
        if bound <= s.level + PRUNE_TOL:
            record("pruned", depth, bound)
            return None
        v = out.x[off:]
        frac = np.abs(v - np.round(v))
        if np.all(frac <= INTEGRALITY_TOL):
            s.integral(v)
            if s.level >= bound - PRUNE_TOL:
                record("integral", depth, bound)
                return None
            # the rounded pattern fell short of the bound: keep branching on the largest deviation
            j = int(np.argmax(frac))
            if frac[j] == 0.0:
                record("unrealisable", depth, bound)
                return None
        else:
            if cfg.heuristic:
                s.heuristic(out.x)
                if bound <= s.level + PRUNE_TOL:
                    record("pruned", depth, bound)
                    return None
            j = int(np.argmin(np.where(frac > INTEGRALITY_TOL, np.abs(v - 0.5), np.inf)))
        record("branch", depth, bound)
        return _Node((0,), bound, depth, lower, upper, out.basis, j)

    cache = [0]  # bytes of cached tableaux held by open nodes

    def push(node):
        t = getattr(node.basis, "tableau", None)
        if t is not None:
            if cache[0] + t.nbytes > TABLEAU_CACHE_BYTES:
                node.basis = node.basis.without_tableau()
            else:
                cache[0] += t.nbytes
        c = next(seq)
        node.key = (-node.bound, c) if best_first else (c,)
        if best_first:
            heapq.heappush(open_nodes, node)
        else:
            open_nodes.append(node)

    root = evaluate(prob.lp.lower.copy(), prob.lp.upper.copy(), None, 0, math.inf)
    if root is not None:
        push(root)
    while open_nodes:
        gap = max(open_bound(), s.level) - s.level
        if s.level > -math.inf and gap <= max(cfg.epsilon, PRUNE_TOL):
            break
        if cfg.node_limit is not None and s.nodes >= cfg.node_limit:
            status = SolveStatus.NODE_LIMIT
            break
        if cfg.time_limit is not None and time.perf_counter() - t0 >= cfg.time_limit:
            status = SolveStatus.TIME_LIMIT
            break
        node = heapq.heappop(open_nodes) if best_first else open_nodes.pop()
        if getattr(node.basis, "tableau", None) is not None:
            cache[0] -= node.basis.tableau.nbytes
        if node.bound <= s.level + PRUNE_TOL:
            continue
        j = node.branch_var
        current[0] = node.bound
        children = []
        for val in (0.0, 1.0):
            lo = node.lower.copy()
            hi = node.upper.copy()
            lo[off + j] = hi[off + j] = val
            child = evaluate(lo, hi, node.basis, node.depth + 1, node.bound)
            if child is not None:
                children.append(child)
        current[0] = -math.inf
        # depth-first explores the zero child first, so it goes on the stack last
        for child in (children if best_first else reversed(children)):
            push(child)

    best_bound = max(open_bound(), s.level)
    if s.inc_coef is None:
        best_bound = max(best_bound, s.cutoff)
    score = s.inc_score
    if s.inc_coef is None:
        gap = math.inf if s.cutoff == -math.inf else best_bound - s.cutoff
        st = status or (SolveStatus.INFEASIBLE if s.cutoff == -math.inf else SolveStatus.OPTIMAL)
        if st is SolveStatus.OPTIMAL and gap > PRUNE_TOL:
            st = SolveStatus.GAP_REACHED
    else:
        gap = max(best_bound - score, 0.0)
        if status is None:
            status = SolveStatus.OPTIMAL if gap <= PRUNE_TOL else SolveStatus.GAP_REACHED
        st = status
    if cfg.trace_path is not None:
        write_trace(cfg.trace_path, s.trace_rows)
    log.debug("alpha=%+d: %s after %d nodes, score %.6g, bound %.6g", prob.alpha, st.value,
              s.nodes, score, best_bound)
    return SolveResult(coefficients=s.inc_coef, score=score, best_bound=best_bound,
                       mio_gap=gap, nodes_explored=s.nodes, status=st,
                       wall_seconds=time.perf_counter() - t0,
                       indicators=s.inc_v, trajectory=s.trajectory)


def write_trace(path, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "depth", "bound", "incumbent", "action"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.10g}", f"{r[3]:.10g}", r[4]])


def solve_prescience(d: Dataset, box: ParamBox, cfg: MioConfig,
                     boxes: Optional[Mapping[int, ParamBox]] = None) -> SolveResult:
    """Solve each alpha sub-problem (``cfg.alphas``, +1 first) and keep the best.

    The alpha=-1 sub-problem is the alpha=+1 problem with x0 negated.  Later
    sub-problems only accept strict improvements, so equal scores resolve to
    the earlier alpha.  ``boxes`` optionally gives a per-alpha parameter box.
    """
    t0 = time.perf_counter()
    best: Optional[SolveResult] = None
    bounds = []
    nodes = 0
    limit_status = None
    trajectory = []
    for alpha in cfg.alphas:
        b = boxes.get(alpha, box) if boxes else box
        prob = build_formulation(d, alpha, b, cfg)
        sub_cfg = cfg
        if cfg.trace_path is not None and len(cfg.alphas) > 1:
            sub_cfg = replace(cfg, trace_path=_alpha_trace(cfg.trace_path, alpha))
        res = branch_and_bound(prob, sub_cfg, cutoff=None if best is None else best.score)
        nodes += res.nodes_explored
        bounds.append(res.best_bound)
        trajectory.extend(res.trajectory)
        if res.status in (SolveStatus.NODE_LIMIT, SolveStatus.TIME_LIMIT):
            limit_status = res.status
        if res.coefficients is not None and (best is None or res.score > best.score + 1e-12):
            best = res
    wall = time.perf_counter() - t0
    if best is None:
        return SolveResult(None, math.nan, max(bounds), math.inf, nodes,
                           limit_status or SolveStatus.INFEASIBLE, wall)
    bound = max(bounds)
    gap = max(bound - best.score, 0.0)
    if limit_status is not None:
        status = limit_status
    elif gap <= PRUNE_TOL:
        status = SolveStatus.OPTIMAL
    else:
        status = SolveStatus.GAP_REACHED
    return SolveResult(best.coefficients, best.score, bound, gap, nodes, status, wall,
                       best.indicators, trajectory)


def _alpha_trace(path, alpha):
    p = Path(path)
    tag = "pos" if alpha == 1 else "neg"
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix}"))
