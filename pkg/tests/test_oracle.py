import numpy as np
import pytest

from prescience.data import Dataset
from prescience.errors import SizeError
from prescience.oracle import exact_max_score
from prescience.score import Coefficients, ParamBox, empirical_score, l0_norm

from conftest import make_dataset

DELTA = 1e-6


def one_dimensional_max(x0, z, y, bound):
    """Independent exact maximum for k=0, p=1, alpha in {+1,-1}: try every gamma
    where the score can change plus the midpoints between them."""
    best = 0.0
    for alpha in (1, -1):
        a = alpha * x0
        knots = [-bound, bound, 0.0]
        for ai, zi in zip(a, z):
            if zi != 0:
                for target in (0.0, -DELTA):
                    g = (target - ai) / zi
                    knots += [g, g + 1e-9, g - 1e-9]
        knots = np.clip(np.array(sorted(knots)), -bound, bound)
        cand = np.concatenate([knots, (knots[1:] + knots[:-1]) / 2])
        for g in cand:
            idx = a + g * z
            pred = np.where(idx >= 0, 1, np.where(idx <= -DELTA, 0, -1))
            if np.any(pred == -1):
                continue
            best = max(best, float(np.mean(pred == y)))
    return best


def test_matches_one_dimensional_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(5, 11))
        x0, z = rng.standard_normal(n), rng.standard_normal(n)
        y = (x0 - 0.8 * z + rng.standard_normal(n) >= 0).astype(float)
        d = Dataset(y, x0, np.zeros((n, 0)), z[:, None], ("x0", "z1"))
        res = exact_max_score(d, ParamBox.cube(0, 1, 10.0), 1)
        assert res.best_score == pytest.approx(one_dimensional_max(x0, z, y, 10.0), abs=1e-12)


def test_witness_achieves_score_and_respects_q():
    for seed in range(15):
        d = make_dataset(n=10, p=3, seed=seed, noise=1.0)
        box = ParamBox.cube(1, 3, 10.0)
        for q in (0, 1, 2):
            res = exact_max_score(d, box, q)
            assert empirical_score(res.witness, d) == res.best_score
            assert l0_norm(res.witness.gamma) <= q
            assert abs(res.best_score * d.n - round(res.best_score * d.n)) < 1e-12


def test_random_search_never_beats_oracle():
    d = make_dataset(n=9, p=2, seed=3, noise=1.2)
    box = ParamBox.cube(1, 2, 10.0)
    best = exact_max_score(d, box, 2).best_score
    rng = np.random.default_rng(0)
    for _ in range(3000):
        t = rng.uniform(-10, 10, 3)
        for alpha in (1, -1):
            assert empirical_score(Coefficients(alpha, t[:1], t[1:]), d) <= best


def test_guard_rails():
    with pytest.raises(SizeError):
        exact_max_score(make_dataset(n=20, p=2), ParamBox.cube(1, 2), 1)
    with pytest.raises(ValueError):
        exact_max_score(make_dataset(n=8, p=2), ParamBox.cube(1, 2), 3)


def _tiny(y, x0):
    n = len(x0)
    return Dataset(np.asarray(y, float), np.asarray(x0, float), np.zeros((n, 0)), np.zeros((n, 0)), ("x0",))


def test_hand_examples():
    x0 = np.array([-1.5, -0.3, 0.2, 0.9, 2.0])
    assert exact_max_score(_tiny(x0 >= 0, x0), ParamBox.cube(0, 0), 0).best_score == 1.0
    assert exact_max_score(_tiny([1, 1], [1.0, -1.0]), ParamBox.cube(0, 0), 0).best_score == 0.5


def test_monotone_in_q_and_box():
    for seed in range(6):
        d = make_dataset(n=9, p=3, seed=seed, noise=1.2)
        scores = [exact_max_score(d, ParamBox.cube(1, 3, 10.0), q).best_score for q in range(4)]
        assert scores == sorted(scores)
        small = exact_max_score(d, ParamBox.cube(1, 3, 0.2), 2).best_score
        assert small <= scores[2]
