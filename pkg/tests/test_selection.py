import json
import math

import numpy as np
import pytest

from prescience.mio import MioConfig
from prescience.score import ParamBox, empirical_score
from prescience.selection import (FitSpec, cross_validate_q, epsilon_rule, fit, resolve_epsilon)

from conftest import make_dataset


def test_epsilon_rule_values():
    assert epsilon_rule(842, 9) == pytest.approx(0.5 * math.sqrt(math.log(842) / 842))
    assert epsilon_rule(674, 9) == pytest.approx(0.0492, abs=5e-4)
    assert epsilon_rule(20, 5) == 0.05
    # high dimension: the log term uses p once p > n
    assert epsilon_rule(5000, 10 ** 6) == pytest.approx(0.5 * math.sqrt(math.log(10 ** 6) / 5000))


def test_resolve_epsilon():
    assert resolve_epsilon("exact", 50, 3) == 0.0
    assert resolve_epsilon("rule", 842, 9) == epsilon_rule(842, 9)
    assert resolve_epsilon(0.01, 50, 3) == 0.01
    with pytest.raises(ValueError):
        resolve_epsilon(-1, 50, 3)


def test_fit_spec_validation():
    with pytest.raises(ValueError):
        FitSpec(q_candidates=())
    with pytest.raises(ValueError):
        FitSpec(q_candidates=(-1,))


def test_cv_selects_relevant_covariate():
    # only z1 matters, strongly
    d = make_dataset(n=60, p=3, seed=2, noise=0.2)
    spec = FitSpec(q_candidates=(0, 1, 2), K=3, seed=4, mio=MioConfig(alphas=(1,)))
    cv = cross_validate_q(d, spec, ParamBox.cube(1, 3))
    assert cv.q_star >= 1
    assert cv.mean_scores[1] > cv.mean_scores[0]
    assert all(len(v) == 3 for v in cv.fold_scores.values())


def test_cv_ties_resolve_to_smallest():
    # constant outcome: every q predicts perfectly
    d = make_dataset(n=20, p=2)
    d = d.__class__(np.ones(20), d.x0, d.x_tilde, d.z, d.column_names, intercept=d.intercept)
    spec = FitSpec(q_candidates=(2, 1, 0), K=4, mio=MioConfig(alphas=(1,)))
    assert cross_validate_q(d, spec, ParamBox.cube(1, 2)).q_star == 0


def test_cv_skips_degenerate_folds():
    d = make_dataset(n=12, p=2)
    z = d.z.copy()
    z[1:, 1] = 0.0  # nonzero only in row 0
    d = d.__class__(d.y, d.x0, d.x_tilde, z, d.column_names, intercept=d.intercept)
    spec = FitSpec(q_candidates=(0, 1), K=3, mio=MioConfig(alphas=(1,)))
    with pytest.warns(UserWarning, match="skipped"):
        cv = cross_validate_q(d, spec, ParamBox.cube(1, 2))
    # only the fold holding row 0 out has a constant training column
    assert len(cv.skipped_folds) == 1


def test_cv_reproducible_and_parallel_consistent():
    d = make_dataset(n=40, p=3, seed=5, noise=1.0)
    box = ParamBox.cube(1, 3)
    spec = FitSpec(q_candidates=(1, 2), K=4, seed=9, mio=MioConfig(alphas=(1,)))
    a = cross_validate_q(d, spec, box)
    b = cross_validate_q(d, FitSpec(q_candidates=(1, 2), K=4, seed=9, mio=MioConfig(alphas=(1,)),
                                    threads=2), box)
    assert a.mean_scores == b.mean_scores and a.q_star == b.q_star


def test_fit_report():
    d = make_dataset(n=40, p=3, seed=1, noise=0.5)
    rep = fit(d, FitSpec(q_candidates=(1,), warm_start=True), ParamBox.cube(1, 3))
    out = json.loads(rep.to_json())
    assert out["q"] == 1 and out["status"] == "Optimal"
    assert len(out["selected_indices"]) <= 1
    assert out["score"] == empirical_score(rep.result.coefficients, d)
    assert out["auxiliary_names"] == ["z1", "z2", "z3"]
    assert out["warmstart"]["used"] in (True, False)
    assert set(out["warmstart"]["per_alpha"]) == {"1", "-1"}


def test_fit_without_auxiliaries():
    d = make_dataset(n=15, p=0)
    rep = fit(d, FitSpec(q_candidates=(1, 2)), ParamBox.cube(1, 0))
    assert rep.q == 0 and rep.result.coefficients.gamma.shape == (0,)


def test_fit_rejects_large_q():
    with pytest.raises(ValueError):
        fit(make_dataset(n=15, p=1), FitSpec(q_candidates=(2, 3)), ParamBox.cube(1, 1))


def test_epsilon_rule_cap_and_monotone():
    assert epsilon_rule(100, 200) == 0.05
    vals = [epsilon_rule(n, 9) for n in range(50, 2000, 50)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_leave_one_out():
    d = make_dataset(n=6, p=1, seed=3)
    cv = cross_validate_q(d, FitSpec(q_candidates=(0, 1), K=6, mio=MioConfig(alphas=(1,))),
                          ParamBox.cube(1, 1))
    assert cv.q_star in (0, 1)


def test_infeasible_warm_start_falls_back_to_cold():
    # logit probabilities say "1" exactly where x0 < 0, impossible with alpha=+1 and no other regressors
    n = 12
    x0 = np.linspace(-1, 1, n)
    y = (x0 < 0).astype(float)
    d = make_dataset(n=n, p=1, k=0)
    d = d.__class__(y, x0, np.zeros((n, 0)), np.zeros((n, 1)), ("x0", "z1"))
    box = ParamBox.cube(0, 1)
    cold = fit(d, FitSpec(q_candidates=(1,), mio=MioConfig(alphas=(1,))), box)
    with pytest.warns(UserWarning):
        warm = fit(d, FitSpec(q_candidates=(1,), warm_start=True, mio=MioConfig(alphas=(1,))), box)
    ws = warm.to_dict()["warmstart"]
    assert ws["used"] is False and ws["feasible"] is False
    assert warm.result.score == cold.result.score
    np.testing.assert_array_equal(warm.result.coefficients.gamma, cold.result.coefficients.gamma)
