import itertools

import numpy as np
import pytest

from prescience.errors import DecompositionError
from prescience.lp import (LinearProgram, LpStatus, cholesky, constraint_violation, solve_linear_system,
                           solve_lp)


def vertex_optimum(c, A, b, lo, hi):
    """Maximise c @ x over {A x <= b, lo <= x <= hi} by enumerating every vertex."""
    n = len(c)
    G = np.vstack([A, np.eye(n), -np.eye(n)])
    h = np.concatenate([b, hi, -lo])
    best = None
    for rows in itertools.combinations(range(G.shape[0]), n):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ x <= h + 1e-9):
            v = c @ x
            best = v if best is None else max(best, v)
    return best


def random_lp(rng):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 5))
    A = rng.normal(size=(m, n)).round(2)
    b = rng.normal(size=m) + 0.5
    lo = -rng.uniform(0.5, 3, n)
    hi = rng.uniform(0.5, 3, n)
    return rng.normal(size=n), A, b, lo, hi


def test_vertex_oracle_agreement():
    rng = np.random.default_rng(42)
    for _ in range(30):
        c, A, b, lo, hi = random_lp(rng)
        ref = vertex_optimum(c, A, b, lo, hi)
        out = solve_lp(LinearProgram(c, A, ["<="] * len(b), b, lo, hi))
        if ref is None:
            assert out.status is LpStatus.INFEASIBLE
        else:
            assert out.status is LpStatus.OPTIMAL
            assert abs(out.objective_value - ref) <= 1e-7


def test_mixed_senses_and_equality():
    # max x + y  s.t. x + y <= 4, x - y = 1, x >= 2
    lp = LinearProgram(np.array([1.0, 1.0]), np.array([[1.0, 1.0], [1.0, -1.0], [1.0, 0.0]]),
                       ["<=", "=", ">="], np.array([4.0, 1.0, 2.0]),
                       np.array([-np.inf, -np.inf]), np.array([np.inf, np.inf]))
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL
    np.testing.assert_allclose(out.x, [2.5, 1.5], atol=1e-9)


def test_infeasible_and_unbounded():
    inf = LinearProgram(np.array([1.0]), np.array([[1.0], [1.0]]), ["<=", ">="],
                        np.array([0.0, 1.0]), np.array([-5.0]), np.array([5.0]))
    assert solve_lp(inf).status is LpStatus.INFEASIBLE
    unb = LinearProgram(np.array([1.0, 0.0]), np.array([[0.0, 1.0]]), ["<="], np.array([1.0]),
                        np.array([0.0, 0.0]), np.array([np.inf, 1.0]))
    assert solve_lp(unb).status is LpStatus.UNBOUNDED


def test_beale_cycling_example():
    # Beale's degenerate LP cycles under naive Dantzig pricing; optimum 1/20
    c = np.array([0.75, -150.0, 0.02, -6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    lp = LinearProgram(c, A, ["<="] * 3, b, np.zeros(4), np.full(4, np.inf))
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL
    assert abs(out.objective_value - 0.05) < 1e-9


def test_warm_restart_after_bound_change():
    rng = np.random.default_rng(3)
    for _ in range(20):
        c, A, b, lo, hi = random_lp(rng)
        lp = LinearProgram(c, A, ["<="] * len(b), b, lo, hi)
        first = solve_lp(lp)
        if first.status is not LpStatus.OPTIMAL or first.basis is None:
            continue
        hi2 = hi.copy()
        hi2[0] = max(lo[0], first.x[0] - 0.3)
        lp2 = LinearProgram(c, A, ["<="] * len(b), b, lo, hi2)
        warm, cold = solve_lp(lp2, first.basis), solve_lp(lp2)
        assert warm.status == cold.status
        if cold.status is LpStatus.OPTIMAL:
            assert abs(warm.objective_value - cold.objective_value) < 1e-9
            assert constraint_violation(lp2, warm.x) <= 1e-9


def test_deterministic():
    rng = np.random.default_rng(9)
    c, A, b, lo, hi = random_lp(rng)
    lp = LinearProgram(c, A, ["<="] * len(b), b, lo, hi)
    x1, x2 = solve_lp(lp).x, solve_lp(lp).x
    np.testing.assert_array_equal(x1, x2)


def test_validation():
    with pytest.raises(ValueError):
        LinearProgram(np.zeros(2), np.zeros((1, 3)), ["<="], np.zeros(1), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        LinearProgram(np.zeros(1), np.zeros((1, 1)), ["<"], np.zeros(1), np.zeros(1), np.ones(1))


def test_linear_system_and_cholesky():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5))
    S = A @ A.T + 5 * np.eye(5)
    x, singular = solve_linear_system(S, np.ones(5))
    assert not singular
    np.testing.assert_allclose(S @ x, 1, atol=1e-10)
    assert solve_linear_system(np.ones((2, 2)), np.ones(2)) == (None, True)
    L = cholesky(S)
    assert np.linalg.norm(L @ L.T - S) / np.linalg.norm(S) < 1e-10
    assert np.allclose(L, np.tril(L))
    with pytest.raises(DecompositionError):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_small_examples():
    lp = LinearProgram(np.array([1.0, 1.0]), np.array([[1.0, 1.0]]), ["<="], np.array([1.0]),
                       np.zeros(2), np.ones(2))
    assert solve_lp(lp).objective_value == pytest.approx(1.0)
    lp = LinearProgram(np.array([1.0]), np.array([[1.0], [1.0]]), [">=", "<="], np.array([2.0, 1.0]),
                       np.array([-np.inf]), np.array([np.inf]))
    assert solve_lp(lp).status is LpStatus.INFEASIBLE


def test_box_linear_abs_max():
    from prescience.lp import box_linear_abs_max
    assert box_linear_abs_max(1.0, np.array([1.0, 2.0, -3.0]), -10 * np.ones(3), 10 * np.ones(3)) == 61
    assert box_linear_abs_max(5.0, np.zeros(0), np.zeros(0), np.zeros(0)) == 5
    rng = np.random.default_rng(12)
    for _ in range(50):
        m = int(rng.integers(1, 5))
        c0, c = rng.normal(), rng.normal(size=m)
        lo = -rng.uniform(0.1, 5, m)
        hi = rng.uniform(0.1, 5, m)
        via_lp = max(s * c0 + solve_lp(LinearProgram(s * c, np.zeros((0, m)), [], np.zeros(0), lo, hi)).objective_value
                     for s in (1.0, -1.0))
        assert abs(box_linear_abs_max(c0, c, lo, hi) - via_lp) < 1e-9


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))
    i = np.arange(3)
    S = 0.25 ** np.abs(np.subtract.outer(i, i))
    L = cholesky(S)
    assert np.abs(L @ L.T - S).max() < 1e-12
    with pytest.raises(DecompositionError):
        cholesky(-np.eye(2))
    x, singular = solve_linear_system(np.eye(3), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(x, [1, 2, 3])
    assert solve_linear_system(np.array([[1.0, 1.0], [2.0, 2.0]]), np.ones(2))[1]
