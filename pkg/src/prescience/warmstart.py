"""Data-driven tightening of the parameter box before the MIO solve.

A logit fit supplies estimated choice probabilities; each observation then
contributes the sign restriction ``(alpha*x0_i + w_i @ t) * (P_i - 0.5) >= 0``.
Coordinate bounds under these restrictions are found one coordinate at a time,
each LP inheriting the bounds already found, and the result is enlarged by a
factor tau around zero.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import ContractError
from .lp import LinearProgram, LpStatus, solve_linear_system, solve_lp
from .score import ParamBox

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_NEWTON = 100
SEPARATION_INDEX = 30.0
PROB_CLIP = 1e-6


@dataclass
class LogitFit:
    coefficients: np.ndarray
    fitted_probabilities: np.ndarray
    converged: bool
    iterations: int
    columns: tuple = ()
    gradient_norm: float = float("nan")
    separated: bool = False


def logit_design(d: Dataset):
    """Intercept, x0, non-intercept focus columns and z, with collinear columns dropped."""
    n = d.n
    cols = [np.ones(n), d.x0]
    names = ["(intercept)", d.x0_name]
    for j, name in enumerate(d.focus_names):
        if name in d.intercept or np.all(d.x_tilde[:, j] == d.x_tilde[0, j]):
            continue
        cols.append(d.x_tilde[:, j])
        names.append(name)
    for j, name in enumerate(d.aux_names):
        cols.append(d.z[:, j])
        names.append(name)
    keep_cols, keep_names = [], []
    rank = 0
    for c, name in zip(cols, names):
        trial = np.column_stack(keep_cols + [c])
        r = np.linalg.matrix_rank(trial)
        if r > rank:
            keep_cols.append(c)
            keep_names.append(name)
            rank = r
    return np.column_stack(keep_cols), tuple(keep_names)


def _sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


def _loglik(X, y, b):
    eta = X @ b
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logit(d: Dataset) -> LogitFit:
    """Newton-Raphson (IRLS) logistic regression with step halving."""
    X, names = logit_design(d)
    y = d.y
    b = np.zeros(X.shape[1])
    ll = _loglik(X, y, b)
    converged = False
    it = 0
    gnorm = np.inf
    for it in range(1, MAX_NEWTON + 1):
        prob = _sigmoid(X @ b)
        grad = X.T @ (y - prob)
        gnorm = float(np.abs(grad).max())
        if gnorm < GRAD_TOL:
            converged = True
            it -= 1
            break
        H = (X * (prob * (1 - prob))[:, None]).T @ X
        step, singular = solve_linear_system(H, grad)
        if singular:
            break
        t = 1.0
        while t > 1e-10:
            cand = b + t * step
            ll_new = _loglik(X, y, cand)
            if ll_new >= ll - 1e-12 * (1 + abs(ll)):
                break
            t /= 2
        b = cand
        ll = ll_new
    eta = X @ b
    prob = _sigmoid(eta)
    grad = X.T @ (y - prob)
    gnorm = float(np.abs(grad).max())
    converged = gnorm < GRAD_TOL
    separated = False
    # saturated probabilities mean the likelihood has no finite maximiser
    if np.abs(eta).max() > SEPARATION_INDEX:
        warnings.warn("logit fit looks perfectly separated; probabilities clipped", stacklevel=2)
        separated = True
    prob = np.clip(prob, PROB_CLIP, 1 - PROB_CLIP)
    return LogitFit(b, prob, converged, it, names, gnorm, separated)


@dataclass
class RefinedSpace:
    l_hat: np.ndarray
    u_hat: np.ndarray
    tau: float
    feasible: bool
    box: Optional[ParamBox] = None
    lp_calls: int = 0
    steps: tuple = ()


def tighten_bounds(d: Dataset, alpha: int, base_box: ParamBox, probs, tau: float = 1.5) -> RefinedSpace:
    """Sequential coordinate bounds of the sign-restricted parameter set.

    ``steps`` records the running box after each coordinate (for nesting checks).
    """
    probs = np.asarray(probs, dtype=float)
    W = np.hstack([d.x_tilde, d.z])
    dim = W.shape[1]
    sgn = np.sign(probs - 0.5)
    active = sgn != 0
    # sign * (alpha x0 + W t) >= 0   <=>   (sign W) t >= -sign alpha x0
    rows = sgn[active, None] * W[active]
    rhs = -sgn[active] * alpha * d.x0[active]
    lo = base_box.lower.copy()
    hi = base_box.upper.copy()
    l_hat = np.full(dim, np.nan)
    u_hat = np.full(dim, np.nan)
    calls = 0
    steps = []
    senses = [">="] * rows.shape[0]
    for j in range(dim):
        c = np.zeros(dim)
        c[j] = -1.0
        calls += 1
        out = solve_lp(LinearProgram(c, rows, senses, rhs, lo, hi))
        if out.status is not LpStatus.OPTIMAL:
            return RefinedSpace(l_hat, u_hat, tau, False, None, calls, tuple(steps))
        l_hat[j] = min(max(out.x[j], lo[j]), hi[j])
        lo_j = lo.copy()
        lo_j[j] = l_hat[j]
        c[j] = 1.0
        calls += 1
        out = solve_lp(LinearProgram(c, rows, senses, rhs, lo_j, hi))
        if out.status is not LpStatus.OPTIMAL:
            return RefinedSpace(l_hat, u_hat, tau, False, None, calls, tuple(steps))
        u_hat[j] = max(min(out.x[j], hi[j]), l_hat[j])
        lo[j], hi[j] = l_hat[j], u_hat[j]
        steps.append((lo.copy(), hi.copy()))
    r = RefinedSpace(l_hat, u_hat, tau, True, None, calls, tuple(steps))
    r.box = enlarge(r, base_box)
    return r


def enlarge(r: RefinedSpace, base_box: ParamBox) -> ParamBox:
    """Symmetric tau-enlargement of the refined bounds, clipped to the base box."""
    if not r.feasible:
        raise ContractError("cannot enlarge an infeasible refinement")
    half = r.tau * np.maximum(np.abs(r.l_hat), np.abs(r.u_hat))
    lo = np.maximum(-half, base_box.lower)
    hi = np.minimum(half, base_box.upper)
    hi = np.maximum(hi, lo)
    k = base_box.k
    return ParamBox(np.column_stack([lo[:k], hi[:k]]), np.column_stack([lo[k:], hi[k:]]))


@dataclass
class WarmStart:
    """Per-alpha outcome of the warm start: the box to use and diagnostics."""

    alpha: int
    used: bool
    feasible: bool
    box: ParamBox
    volume_ratio: float
    refined: Optional[RefinedSpace] = None
    reason: str = ""


def warm_start(d: Dataset, base_box: ParamBox, alphas=(1, -1), tau: float = 1.5,
               fit: Optional[LogitFit] = None) -> dict:
    """Refined boxes per alpha, falling back to ``base_box`` where the refinement fails."""
    out = {}
    if d.p >= d.n:
        log.info("warm start disabled: p=%d >= n=%d", d.p, d.n)
        for a in alphas:
            out[a] = WarmStart(a, False, False, base_box, 1.0, None, "p >= n")
        return out
    if fit is None:
        fit = fit_logit(d)
    for a in alphas:
        r = tighten_bounds(d, a, base_box, fit.fitted_probabilities, tau)
        if r.feasible:
            ratio = r.box.volume() / base_box.volume() if base_box.volume() > 0 else 1.0
            out[a] = WarmStart(a, True, True, r.box, ratio, r)
        else:
            log.info("warm start infeasible for alpha=%+d; using the cold-start box", a)
            out[a] = WarmStart(a, False, False, base_box, 1.0, r, "infeasible sign restrictions")
    return out
