import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prescience.score import (Coefficients, ParamBox, compute_big_m, empirical_score, index_values,
                              l0_norm, predict)

from conftest import make_dataset


def test_predict_uses_weak_inequality():
    d = make_dataset(n=4, p=1, k=0)
    d = d.__class__(np.array([1.0, 0, 1, 0]), np.array([0.0, -1, 2, -0.5]), np.zeros((4, 0)),
                    np.zeros((4, 1)), d.column_names)
    c = Coefficients(1, [], [0.0])
    np.testing.assert_array_equal(predict(c, d), [1, 0, 1, 0])
    assert empirical_score(c, d) == 1.0


def test_score_is_multiple_of_one_over_n():
    d = make_dataset(n=17, p=2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = Coefficients(1, rng.normal(size=1), rng.normal(size=2))
        s = empirical_score(c, d)
        assert abs(s * 17 - round(s * 17)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.01, 100), seed=st.integers(0, 10_000))
def test_positive_scaling_invariance(a, seed):
    d = make_dataset(n=25, p=3, seed=seed)
    rng = np.random.default_rng(seed)
    c = Coefficients(1, rng.normal(size=1), rng.normal(size=3))
    scaled = Coefficients(1, a * c.beta, a * c.gamma)
    da = d.with_x0(a * d.x0)
    np.testing.assert_array_equal(predict(c, d), predict(scaled, da))


def test_l0_tolerance():
    assert l0_norm([0.0, 1e-6, -1e-6, 1.1e-6, 3.0]) == 2


def test_size_mismatch():
    with pytest.raises(ValueError):
        index_values(Coefficients(1, [0.0, 0.0], [1.0]), make_dataset(n=5, p=1))


def test_param_box():
    b = ParamBox.cube(1, 2, 10.0)
    assert b.volume() == 20.0 ** 3
    inner = ParamBox([[-1, 1]], [[-2, 2], [0, 1]])
    assert b.contains(inner) and not inner.contains(b)
    with pytest.raises(ValueError):
        ParamBox([[1, -1]], np.zeros((0, 2)))
    with pytest.raises(ValueError):
        ParamBox([[-np.inf, 1]], np.zeros((0, 2)))


def test_big_m_bounds_index_over_box():
    d = make_dataset(n=20, p=3)
    box = ParamBox.cube(1, 3, 4.0)
    for alpha in (1, -1):
        M = compute_big_m(d, alpha, box)
        rng = np.random.default_rng(alpha + 5)
        for _ in range(200):
            t = rng.uniform(box.lower, box.upper)
            idx = index_values(Coefficients(alpha, t[:1], t[1:]), d)
            assert np.all(np.abs(idx) <= M + 1e-12)
        # attained at a corner
        W = np.hstack([d.x_tilde, d.z])
        corner = np.where(np.sign(W[0] * np.sign(alpha * d.x0[0] + 1e-300)) > 0, box.upper, box.lower)
        assert abs(alpha * d.x0[0] + W[0] @ corner) <= M[0] + 1e-12


def test_big_m_polyhedron_tighter():
    d = make_dataset(n=10, p=2)
    box = ParamBox.cube(1, 2, 5.0)
    A = np.array([[1.0, 1.0, 1.0]])
    M_box = compute_big_m(d, 1, box)
    M_poly = compute_big_m(d, 1, box, (A, np.array([0.5])))
    assert np.all(M_poly <= M_box + 1e-9)


def _tiny(y, x0, xt=None, z=None):
    n = len(x0)
    xt = np.zeros((n, 0)) if xt is None else np.asarray(xt, dtype=float)
    z = np.zeros((n, 0)) if z is None else np.asarray(z, dtype=float)
    names = ("x0", *[f"b{j}" for j in range(xt.shape[1])], *[f"z{j}" for j in range(z.shape[1])])
    from prescience.data import Dataset
    return Dataset(np.asarray(y, dtype=float), np.asarray(x0, dtype=float), xt, z, names)


def test_hand_examples():
    d = _tiny([1, 0], [1.0, -1.0])
    plus, minus = Coefficients(1, [], []), Coefficients(-1, [], [])
    np.testing.assert_array_equal(predict(plus, d), [1, 0])
    np.testing.assert_array_equal(predict(minus, d), [0, 1])
    assert empirical_score(plus, d) == 1.0
    assert empirical_score(minus, d) == 0.0


def test_complement_and_recount():
    rng = np.random.default_rng(4)
    d = make_dataset(n=31, p=3, seed=4)
    for _ in range(20):
        b, g = rng.normal(size=1), rng.normal(size=3)
        c, flip = Coefficients(1, b, g), Coefficients(-1, -b, -g)
        s = empirical_score(c, d)
        assert empirical_score(flip, d) == pytest.approx(1 - s)
        idx = d.x0 + d.x_tilde @ b + d.z @ g
        assert s == sum(int(idx[i] >= 0) == d.y[i] for i in range(d.n)) / d.n


def test_l0_examples():
    assert l0_norm([0.0, 3e-7, 0.5]) == 1
    assert l0_norm(np.zeros(4)) == 0
    assert l0_norm([1e-6, 1.0000001e-6]) == 1


def test_big_m_examples():
    d = _tiny([1], [1.0], xt=[[1.0]], z=[[2.0, -3.0]])
    assert compute_big_m(d, 1, ParamBox.cube(1, 2, 10.0))[0] == 61
    d0 = _tiny([1, 0], [2.0, -3.0])
    np.testing.assert_array_equal(compute_big_m(d0, 1, ParamBox.cube(0, 0)), [2.0, 3.0])


def test_big_m_monotone_in_box():
    d = make_dataset(n=15, p=2)
    small, big = ParamBox.cube(1, 2, 2.0), ParamBox.cube(1, 2, 7.0)
    assert np.all(compute_big_m(d, 1, small) <= compute_big_m(d, 1, big))
