import math

import numpy as np
import pytest

import frechet_ma as fm


def test_gaussian_grid_and_distance():
    a = fm.gaussian_quantile(0.0, 1.0, 1000)
    b = fm.gaussian_quantile(1.0, 2.0, 1000)
    assert a.shape == (1000,)
    assert np.all(np.diff(a) > 0)
    assert abs(fm.wasserstein_sq(a, b) - 2.0) < 0.01
    assert fm.wasserstein_sq(a, a) == 0.0
    assert fm.normal_quantile(0.5) == 0.0
    assert math.isclose(fm.normal_quantile(0.975), 1.959963984540054, rel_tol=1e-12)


def test_isotonic_and_empirical():
    np.testing.assert_allclose(fm.isotonic_project(np.array([3.0, 1.0, 2.0])), [2.0, 2.0, 2.0])
    q = fm.empirical_quantile([3.0, 1.0, 2.0], 4)
    np.testing.assert_allclose(q, [1.0, 1.625, 2.375, 3.0])


def _data(n=40, p=3, m=10, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, p))
    base = np.array([fm.normal_quantile((2 * k + 1) / (2 * m)) for k in range(m)])
    loc = 1 + 2 * x[:, 0] + 0.3 * rng.standard_normal(n)
    scale = 2 + 0.5 * x[:, 1]
    y = loc[:, None] + scale[:, None] * base[None, :]
    return x, y


def test_fit_and_folds():
    x, y = _data()
    fit = fm.CandidateFit(x, y, [0, 1])
    np.testing.assert_allclose(fit.predict(fit.mean_x), y.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(fm.fit_at(x, y, [0, 1], x[3, :2]), fit.predict(x[3, :2]), rtol=1e-13)
    folds = fm.make_folds(10, 3)
    assert [len(f) for f in folds] == [4, 3, 3]
    loo = fm.leave_group_out_fits(x, y, [0], fm.make_folds(40, 40))
    assert loo.shape == (40, 10)


def test_cv_weights_and_prediction():
    x, y = _data(seed=1)
    cands = [[0], [1], [0, 1], [0, 1, 2]]
    q = fm.build_cv_quadratic(x, y, cands, fm.make_folds(40, 5))
    w = fm.solve_simplex_qp(q)
    assert w.converged
    assert abs(w.weights.sum() - 1.0) < 1e-12
    assert w.weights.min() >= 0.0
    # The first-column-only model is misspecified for the scale.
    assert w.weights[2] + w.weights[3] > 0.5
    pred = fm.averaged_predict(x, y, cands, w.weights, x[0])
    assert np.all(np.diff(pred) >= 0)
    ics = fm.information_criteria(x, y, cands)
    assert len(ics) == 4 and all(ic["sigma2_hat"] >= 0 for ic in ics)


def test_errors():
    x, y = _data(n=5)
    with pytest.raises(fm.FitError):
        fm.CandidateFit(np.ones((5, 1)), y, [0])
    with pytest.raises(ValueError):
        fm.solve_simplex_qp(fm.CvQuadratic(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2), 0.0))


def test_small_experiment():
    out = fm.run_experiment(n_values=[40], replications=2, grid_m=10, k_folds=5)
    methods = [r["method"] for r in out["risks"]]
    assert methods == ["CV", "sAIC", "sBIC", "EW", "AIC", "BIC", "Full", "Oracle"]
    assert all(r["mean_risk"] >= 0 for r in out["risks"])
    assert 0.0 <= out["weights"][0]["mean_correct_weight_sum"] <= 1.0
