"""Dense bounded-variable simplex and small linear-algebra helpers.

Every row ``A_r x (<=|>=|=) b_r`` gets one slack column so the working
system is ``[A | I] (x, s) = b`` with bounds on both ``x`` and ``s``.  The
primal routine is a two-phase bounded simplex (artificial columns in phase
one); a bounded dual simplex re-optimises from a stored basis after bound
changes, which is what branch-and-bound needs between parent and child.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DecompositionError, NumericFailure

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
OPT_TOL = 1e-9
REFACTOR_EVERY = 50


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


LE, GE, EQ = "<=", ">=", "="


@dataclass
class LinearProgram:
    """maximize ``objective @ x`` subject to row constraints and variable bounds."""

    objective: np.ndarray
    rows: np.ndarray
    senses: Sequence[str]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        nvar = self.objective.shape[0]
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, nvar)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        m = self.rows.shape[0]
        if self.rhs.shape[0] != m or len(self.senses) != m:
            raise ValueError("rows, senses and rhs disagree in length")
        if self.lower.shape[0] != nvar or self.upper.shape[0] != nvar:
            raise ValueError("variable bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        for s in self.senses:
            if s not in (LE, GE, EQ):
                raise ValueError(f"unknown constraint sense {s!r}")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]


@dataclass
class Basis:
    """Restart information: basic columns and which nonbasics sit at their upper bound."""

    basic: np.ndarray
    at_upper: np.ndarray
    # optional cached tableau (B^-1 [A | I]) and pivots since its last refactorisation
    tableau: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    drift: int = 0

    def without_tableau(self) -> "Basis":
        return Basis(self.basic, self.at_upper)


@dataclass
class LpOutcome:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    iterations: int = 0
    basis: Optional[Basis] = field(default=None, repr=False)


class _Tableau:
    """Working state of the bounded simplex over columns [structural | slack | artificial]."""

    def __init__(self, A_full, b, lo, hi, basic, x, tableau=None, drift=0):
        self.A = A_full
        self.b = b
        self.lo = lo
        self.hi = hi
        self.basic = np.asarray(basic, dtype=np.int64)
        self.x = x
        self.iterations = 0
        self.drift = 0
        if tableau is not None and tableau.shape == A_full.shape and drift < REFACTOR_EVERY:
            self._adopt(tableau, drift)
        else:
            self.refactor()

    def _adopt(self, tableau, drift):
        # the slack block of B^-1 [A | I] is B^-1 itself
        self.T = tableau.copy()
        self.drift = drift
        nonbasic = np.ones(self.ncols, dtype=bool)
        nonbasic[self.basic] = False
        n = self.ncols - self.m
        resid = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basic] = self.T[:, n:] @ resid
        self.is_basic = ~nonbasic

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def ncols(self):
        return self.A.shape[1]

    def refactor(self):
        B = self.A[:, self.basic]
        try:
            self.T = np.linalg.solve(B, self.A)
        except np.linalg.LinAlgError as exc:
            raise NumericFailure("singular basis", self.iterations) from exc
        nonbasic = np.ones(self.ncols, dtype=bool)
        nonbasic[self.basic] = False
        resid = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basic] = np.linalg.solve(B, resid)
        self.is_basic = ~nonbasic
        self.drift = 0

    def reduced_costs(self, cost):
        return cost - cost[self.basic] @ self.T

    def pivot(self, r, j):
        col = self.T[:, j].copy()
        piv = col[r]
        self.T[r] /= piv
        col[r] = 0.0
        self.T -= np.outer(col, self.T[r])
        self.T[:, j] = 0.0
        self.T[r, j] = 1.0
        self.is_basic[self.basic[r]] = False
        self.is_basic[j] = True
        self.basic[r] = j
        self.iterations += 1
        self.drift += 1
        if self.drift >= REFACTOR_EVERY:
            self.refactor()

    # -- primal ---------------------------------------------------------
    def primal(self, cost, max_iter):
        """Bounded primal simplex on ``cost``; returns 'optimal' or 'unbounded'."""
        m, N = self.m, self.ncols
        bland_after = 5 * (m + N)
        start = self.iterations
        fixed = self.hi - self.lo <= 0.0
        while True:
            k = self.iterations - start
            if k > max_iter:
                raise NumericFailure("iteration limit in primal simplex", self.iterations)
            d = self.reduced_costs(cost)
            d[self.is_basic] = 0.0
            d[fixed] = 0.0
            can_up = (d > OPT_TOL) & (self.x < self.hi - FEAS_TOL)
            can_down = (d < -OPT_TOL) & (self.x > self.lo + FEAS_TOL)
            eligible = np.flatnonzero(can_up | can_down)
            if eligible.size == 0:
                return "optimal"
            if k < bland_after:
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            else:
                j = int(eligible[0])
            direction = 1.0 if can_up[j] else -1.0
            col = self.T[:, j]
            step = -direction * col
            xb = self.x[self.basic]
            lob = self.lo[self.basic]
            hib = self.hi[self.basic]
            limits = np.full(m, np.inf)
            dec = step < -PIVOT_TOL
            inc = step > PIVOT_TOL
            with np.errstate(invalid="ignore"):
                limits[dec] = (xb[dec] - lob[dec]) / (-step[dec])
                limits[inc] = (hib[inc] - xb[inc]) / step[inc]
            limits = np.where(np.isnan(limits), np.inf, limits)
            limits = np.maximum(limits, 0.0)
            own = self.hi[j] - self.lo[j]
            tmin = limits.min() if m else np.inf
            if own <= tmin:
                if not np.isfinite(own):
                    return "unbounded"
                # bound flip, basis unchanged
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
                self.x[self.basic] = xb + step * own
                self.iterations += 1
                continue
            ties = np.flatnonzero(limits <= tmin + 1e-12 * max(1.0, tmin))
            if k < bland_after:
                r = int(ties[np.argmax(np.abs(col[ties]))])
            else:
                r = int(ties[np.argmin(self.basic[ties])])
            if abs(col[r]) < PIVOT_TOL:
                raise NumericFailure("pivot below tolerance", self.iterations)
            t = tmin
            leaving = self.basic[r]
            self.x[self.basic] = xb + step * t
            self.x[j] += direction * t
            self.x[leaving] = self.lo[leaving] if step[r] < 0 else self.hi[leaving]
            self.pivot(r, j)

    # -- dual -----------------------------------------------------------
    def dual(self, cost, max_iter):
        """Bounded dual simplex; assumes dual feasibility. Returns 'feasible' or 'infeasible'."""
        m = self.m
        start = self.iterations
        bland_after = 5 * (m + self.ncols)
        fixed = self.hi - self.lo <= 0.0
        while True:
            k = self.iterations - start
            if k > max_iter:
                raise NumericFailure("iteration limit in dual simplex", self.iterations)
            xb = self.x[self.basic]
            below = self.lo[self.basic] - xb
            above = xb - self.hi[self.basic]
            viol = np.maximum(below, above)
            bad = np.flatnonzero(viol > FEAS_TOL)
            if bad.size == 0:
                return "feasible"
            if k < bland_after:
                r = int(bad[np.argmax(viol[bad])])
            else:
                r = int(bad[np.argmin(self.basic[bad])])
            to_lower = below[r] > 0
            target = self.lo[self.basic[r]] if to_lower else self.hi[self.basic[r]]
            row = self.T[r]
            d = self.reduced_costs(cost)
            at_low = (~self.is_basic) & (~fixed) & (self.x <= self.lo + FEAS_TOL)
            at_up = (~self.is_basic) & (~fixed) & (self.x >= self.hi - FEAS_TOL)
            free = (~self.is_basic) & (~fixed) & ~at_low & ~at_up
            if to_lower:
                cand = (at_low & (row < -PIVOT_TOL)) | (at_up & (row > PIVOT_TOL))
            else:
                cand = (at_low & (row > PIVOT_TOL)) | (at_up & (row < -PIVOT_TOL))
            cand |= free & (np.abs(row) > PIVOT_TOL)
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "infeasible"
            ratios = np.abs(d[idx]) / np.abs(row[idx])
            rmin = ratios.min()
            ties = idx[ratios <= rmin + 1e-12 * max(1.0, rmin)]
            if k < bland_after:
                j = int(ties[np.argmax(np.abs(row[ties]))])
            else:
                j = int(ties[0])
            delta = (xb[r] - target) / row[j]
            col = self.T[:, j]
            leaving = self.basic[r]
            self.x[self.basic] = xb - col * delta
            self.x[j] += delta
            self.x[leaving] = target
            self.pivot(r, j)


def _standard_form(lp: LinearProgram):
    m = lp.num_rows
    A_full = np.hstack([lp.rows, np.eye(m)])
    slo = np.zeros(m)
    shi = np.zeros(m)
    for r, s in enumerate(lp.senses):
        if s == LE:
            slo[r], shi[r] = 0.0, np.inf
        elif s == GE:
            slo[r], shi[r] = -np.inf, 0.0
    lo = np.concatenate([lp.lower, slo])
    hi = np.concatenate([lp.upper, shi])
    return A_full, lo, hi


def _nonbasic_start(lo, hi):
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    return x.astype(float)


def _finish(lp, tab, n, cost):
    x = tab.x[:n].copy()
    # snap to bounds against round-off
    x = np.minimum(np.maximum(x, lp.lower), lp.upper)
    at_upper = np.zeros(tab.ncols, dtype=bool)
    nb = ~tab.is_basic
    at_upper[nb] = (tab.x[nb] >= tab.hi[nb] - FEAS_TOL) & np.isfinite(tab.hi[nb]) & (tab.hi[nb] > tab.lo[nb])
    basis = None
    if np.all(tab.basic < n + lp.num_rows):
        basis = Basis(basic=tab.basic.copy(), at_upper=at_upper[: n + lp.num_rows].copy())
        if tab.ncols == n + lp.num_rows:
            basis.tableau, basis.drift = tab.T, tab.drift
    return LpOutcome(LpStatus.OPTIMAL, x, float(lp.objective @ x), tab.iterations, basis)


def _max_iter(m, N):
    return 50 * (m + N) + 1000


def _cold_solve(lp: LinearProgram) -> LpOutcome:
    m, n = lp.num_rows, lp.num_vars
    A_full, lo, hi = _standard_form(lp)
    x = _nonbasic_start(lo, hi)
    x[n:] = 0.0
    resid = lp.rhs - lp.rows @ x[:n]
    slo, shi = lo[n:], hi[n:]
    clipped = np.minimum(np.maximum(resid, slo), shi)
    need_art = np.abs(resid - clipped) > FEAS_TOL
    art_rows = np.flatnonzero(need_art)
    n_art = art_rows.size
    if n_art:
        art = np.zeros((m, n_art))
        signs = np.sign(resid[art_rows] - clipped[art_rows])
        art[art_rows, np.arange(n_art)] = signs
        A_full = np.hstack([A_full, art])
        lo = np.concatenate([lo, np.zeros(n_art)])
        hi = np.concatenate([hi, np.full(n_art, np.inf)])
        x = np.concatenate([x, np.zeros(n_art)])
    basic = np.arange(n, n + m)
    x[n:n + m] = np.where(need_art, clipped, resid)
    for a, r in enumerate(art_rows):
        basic[r] = n + m + a
    tab = _Tableau(A_full, lp.rhs.copy(), lo, hi, basic, x)
    N = tab.ncols
    limit = _max_iter(m, N)
    if n_art:
        cost1 = np.zeros(N)
        cost1[n + m:] = -1.0
        tab.primal(cost1, limit)
        infeas = tab.x[n + m:].sum()
        scale = max(1.0, np.abs(lp.rhs).max(initial=0.0))
        if infeas > FEAS_TOL * scale * max(1, n_art) * 10:
            return LpOutcome(LpStatus.INFEASIBLE, iterations=tab.iterations)
        tab.hi[n + m:] = 0.0
        tab.x[n + m:] = np.minimum(tab.x[n + m:], 0.0)
        # drive basic artificials out where a usable pivot exists
        for r in range(m):
            if tab.basic[r] >= n + m:
                row = tab.T[r, : n + m].copy()
                row[tab.is_basic[: n + m]] = 0.0
                cands = np.flatnonzero(np.abs(row) > 1e-7)
                if cands.size:
                    j = int(cands[np.argmax(np.abs(row[cands]))])
                    leaving = tab.basic[r]
                    tab.pivot(r, j)
                    tab.x[leaving] = 0.0
                    tab.refactor()
    cost = np.zeros(tab.ncols)
    cost[:n] = lp.objective
    if tab.primal(cost, limit) == "unbounded":
        return LpOutcome(LpStatus.UNBOUNDED, iterations=tab.iterations)
    if np.any(tab.basic >= n + m):
        # a zero-level artificial stayed basic; try to recover a slack basis for restarts
        try:
            out = _warm_solve(lp, _basis_from_point(lp, tab, n, m), cold_fallback=False)
        except NumericFailure:
            out = None
        if out is not None and out.status is LpStatus.OPTIMAL:
            return out
    return _finish(lp, tab, n, cost)


def _basis_from_point(lp, tab, n, m):
    basic = tab.basic.copy()
    taken = set(int(b) for b in basic if b < n + m)
    for r in range(m):
        if basic[r] >= n + m:
            for cand in range(n, n + m):
                if cand not in taken:
                    basic[r] = cand
                    taken.add(cand)
                    break
    at_upper = np.zeros(n + m, dtype=bool)
    x = tab.x[: n + m]
    hi = tab.hi[: n + m]
    at_upper[:] = np.isfinite(hi) & (x >= hi - FEAS_TOL)
    return Basis(basic=basic, at_upper=at_upper)


def _warm_solve(lp: LinearProgram, basis: Basis, cold_fallback=True) -> Optional[LpOutcome]:
    m, n = lp.num_rows, lp.num_vars
    A_full, lo, hi = _standard_form(lp)
    N = n + m
    if basis.basic.shape[0] != m or basis.at_upper.shape[0] != N:
        return _cold_solve(lp) if cold_fallback else None
    x = _nonbasic_start(lo, hi)
    up = basis.at_upper & np.isfinite(hi)
    x[up] = hi[up]
    try:
        tab = _Tableau(A_full, lp.rhs.copy(), lo, hi, basis.basic.copy(), x,
                       basis.tableau, basis.drift)
    except NumericFailure:
        return _cold_solve(lp) if cold_fallback else None
    cost = np.zeros(N)
    cost[:n] = lp.objective
    limit = _max_iter(m, N)
    d = tab.reduced_costs(cost)
    nb = ~tab.is_basic
    fixed = hi - lo <= 0.0
    at_low = nb & ~fixed & (tab.x <= lo + FEAS_TOL)
    at_up = nb & ~fixed & (tab.x >= hi - FEAS_TOL)
    free = nb & ~fixed & ~at_low & ~at_up
    dual_ok = not (np.any(d[at_low] > OPT_TOL * 10) or np.any(d[at_up] < -OPT_TOL * 10)
                   or np.any(np.abs(d[free]) > OPT_TOL * 10))
    xb = tab.x[tab.basic]
    primal_ok = np.all(xb >= lo[tab.basic] - FEAS_TOL) and np.all(xb <= hi[tab.basic] + FEAS_TOL)
    try:
        if not primal_ok:
            if not dual_ok:
                return _cold_solve(lp) if cold_fallback else None
            if tab.dual(cost, limit) == "infeasible":
                return LpOutcome(LpStatus.INFEASIBLE, iterations=tab.iterations)
        if tab.primal(cost, limit) == "unbounded":
            return LpOutcome(LpStatus.UNBOUNDED, iterations=tab.iterations)
    except NumericFailure:
        if cold_fallback:
            return _cold_solve(lp)
        raise
    return _finish(lp, tab, n, cost)


def solve_lp(lp: LinearProgram, basis: Optional[Basis] = None) -> LpOutcome:
    """Solve ``lp``; ``basis`` (from a previous outcome on an LP with the same
    rows) restarts the search with the dual simplex after bound changes."""
    if basis is not None:
        out = _warm_solve(lp, basis)
    else:
        out = _cold_solve(lp)
    if out.status is LpStatus.OPTIMAL:
        viol = constraint_violation(lp, out.x)
        scale = 1.0 + np.abs(lp.rhs).max(initial=0.0)
        if viol > 1e-7 * scale:
            if basis is not None:
                return solve_lp(lp)
            raise NumericFailure(f"solution violates constraints by {viol:.3g}", out.iterations)
    return out


def constraint_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest violation of any row or bound at ``x``."""
    ax = lp.rows @ x
    v = 0.0
    for sense, code in ((LE, 1), (GE, -1), (EQ, 0)):
        mask = np.array([s == sense for s in lp.senses], dtype=bool)
        if not mask.any():
            continue
        diff = ax[mask] - lp.rhs[mask]
        if code == 1:
            v = max(v, diff.max(initial=0.0))
        elif code == -1:
            v = max(v, (-diff).max(initial=0.0))
        else:
            v = max(v, np.abs(diff).max(initial=0.0))
    v = max(v, (lp.lower - x).max(initial=0.0), (x - lp.upper).max(initial=0.0))
    return float(v)


def box_linear_abs_max(c0: float, c, lower, upper) -> float:
    """max over t in the box of ``|c0 + c @ t|`` in closed form."""
    c = np.asarray(c, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if c.size == 0:
        return abs(float(c0))
    hi_part = np.maximum(c * lower, c * upper).sum()
    lo_part = np.maximum(-c * lower, -c * upper).sum()
    return float(max(c0 + hi_part, -c0 + lo_part))


def solve_linear_system(A, b):
    """Gaussian elimination with partial pivoting.

    Returns ``(x, False)`` or ``(None, True)`` when a pivot falls below
    ``1e-10 * max|A|``.
    """
    M = np.array(A, dtype=float)
    rhs = np.array(b, dtype=float).reshape(-1)
    d = M.shape[0]
    if M.shape != (d, d) or rhs.shape[0] != d:
        raise ValueError("A must be square and match b")
    scale = np.abs(M).max(initial=0.0)
    tol = 1e-10 * scale
    if scale == 0.0:
        return None, True
    for col in range(d):
        p = col + int(np.argmax(np.abs(M[col:, col])))
        if abs(M[p, col]) < tol:
            return None, True
        if p != col:
            M[[col, p]] = M[[p, col]]
            rhs[[col, p]] = rhs[[p, col]]
        factors = M[col + 1:, col] / M[col, col]
        M[col + 1:, col:] -= np.outer(factors, M[col, col:])
        rhs[col + 1:] -= factors * rhs[col]
    x = np.zeros(d)
    for row in range(d - 1, -1, -1):
        x[row] = (rhs[row] - M[row, row + 1:] @ x[row + 1:]) / M[row, row]
    return x, False


def cholesky(S):
    """Lower-triangular ``L`` with ``L @ L.T == S``; raises on a non-positive pivot."""
    S = np.asarray(S, dtype=float)
    d = S.shape[0]
    if S.shape != (d, d):
        raise ValueError("matrix must be square")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max(initial=0.0))):
        raise DecompositionError("matrix is not symmetric")
    L = np.zeros_like(S)
    for j in range(d):
        piv = S[j, j] - L[j, :j] @ L[j, :j]
        if piv <= 0.0:
            raise DecompositionError(f"non-positive pivot {piv:.3g} at column {j}")
        L[j, j] = np.sqrt(piv)
        L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L
