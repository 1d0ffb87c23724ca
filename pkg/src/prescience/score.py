"""Prediction rule, empirical score, effective support and big-M bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .lp import LinearProgram, LpStatus, box_linear_abs_max, solve_lp

SELECTION_TOL = 1e-6


@dataclass(frozen=True)
class Coefficients:
    alpha: int
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        if self.alpha not in (-1, 1):
            raise ValueError("alpha must be +1 or -1")
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).reshape(-1))


@dataclass(frozen=True)
class ParamBox:
    """Per-coordinate bounds for (beta, gamma)."""

    beta_bounds: np.ndarray
    gamma_bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta_bounds, dtype=float).reshape(-1, 2)
        g = np.asarray(self.gamma_bounds, dtype=float).reshape(-1, 2)
        for arr in (b, g):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameter bounds must be finite")
            if np.any(arr[:, 0] > arr[:, 1]):
                raise ValueError("lower bound exceeds upper bound")
            arr.setflags(write=False)
        object.__setattr__(self, "beta_bounds", b)
        object.__setattr__(self, "gamma_bounds", g)

    @classmethod
    def cube(cls, k: int, p: int, bound: float = 10.0) -> "ParamBox":
        return cls(np.tile([-bound, bound], (k, 1)), np.tile([-bound, bound], (p, 1)))

    @property
    def lower(self) -> np.ndarray:
        return np.concatenate([self.beta_bounds[:, 0], self.gamma_bounds[:, 0]])

    @property
    def upper(self) -> np.ndarray:
        return np.concatenate([self.beta_bounds[:, 1], self.gamma_bounds[:, 1]])

    @property
    def k(self) -> int:
        return self.beta_bounds.shape[0]

    @property
    def p(self) -> int:
        return self.gamma_bounds.shape[0]

    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, other: "ParamBox") -> bool:
        return bool(np.all(self.lower <= other.lower) and np.all(other.upper <= self.upper))


def _check(c: Coefficients, d: Dataset):
    if c.beta.shape[0] != d.k or c.gamma.shape[0] != d.p:
        raise ValueError(f"coefficient sizes ({c.beta.shape[0]}, {c.gamma.shape[0]}) "
                         f"do not match dataset (k={d.k}, p={d.p})")


def index_values(c: Coefficients, d: Dataset) -> np.ndarray:
    """alpha * x0 + x_tilde @ beta + z @ gamma for every observation."""
    _check(c, d)
    return c.alpha * d.x0 + d.x_tilde @ c.beta + d.z @ c.gamma


def predict(c: Coefficients, d: Dataset) -> np.ndarray:
    """1 where the index is >= 0, else 0."""
    return (index_values(c, d) >= 0.0).astype(np.int64)


def empirical_score(c: Coefficients, d: Dataset) -> float:
    hits = int(np.count_nonzero(predict(c, d) == d.y))
    return hits / d.n


def l0_norm(gamma, tol: float = SELECTION_TOL) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return int(np.count_nonzero(np.abs(np.asarray(gamma, dtype=float)) > tol))


def compute_big_m(d: Dataset, alpha: int, box: ParamBox,
                  polyhedron: Optional[tuple] = None) -> np.ndarray:
    """Per-observation bound on |index| over the parameter space.

    With ``polyhedron=(A, b)`` the space is ``{t in box : A t <= b}`` and each
    bound takes two LPs; otherwise the box closed form is used.
    """
    W = np.hstack([d.x_tilde, d.z])
    a = alpha * d.x0
    if polyhedron is None:
        lo, hi = box.lower, box.upper
        pos = np.maximum(W * lo, W * hi).sum(axis=1)
        neg = np.maximum(-W * lo, -W * hi).sum(axis=1)
        return np.maximum(a + pos, -a + neg)
    A, b = polyhedron
    out = np.empty(d.n)
    for i in range(d.n):
        best = 0.0
        for sgn in (1.0, -1.0):
            lp = LinearProgram(sgn * W[i], A, ["<="] * len(b), b, box.lower, box.upper)
            res = solve_lp(lp)
            if res.status is not LpStatus.OPTIMAL:
                raise ValueError("parameter polyhedron is empty")
            best = max(best, sgn * a[i] + res.objective_value)
        out[i] = best
    return out


def big_m_row(c0: float, w, box: ParamBox) -> float:
    return box_linear_abs_max(c0, w, box.lower, box.upper)
