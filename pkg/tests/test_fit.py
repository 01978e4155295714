from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from levelrep.fit import (
    BracketWarning,
    SqrtScalingRegressor,
    TminEstimator,
    fit_sqrt_coefficient,
    fit_t_min,
    golden_section_minimize,
    t_min_objective,
)
from levelrep.models import (
    AnsatzParams,
    ansatz_cumulative_P,
    poisson_cumulative_P,
    sample_ansatz_spacings,
    t_min_rectangle,
)
from levelrep.stats import spacing_histogram


@pytest.fixture(scope="module")
def ansatz_hist():
    rng = np.random.default_rng(42)
    sp = sample_ansatz_spacings(10_000_000, AnsatzParams(0.10), rng)
    return spacing_histogram(sp, 0.05, 5.0)


def test_golden_section_on_parabola():
    x, fx = golden_section_minimize(lambda t: (t - 0.3) ** 2 + 1.0, 0.0, 1.0, tol=1e-8)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert fx == pytest.approx(1.0)


def test_recovers_ansatz_t_min(ansatz_hist):
    res = fit_t_min(ansatz_hist)
    assert res.parameter == pytest.approx(0.10, abs=0.01)
    assert not res.at_bracket_edge
    assert 0 < res.parameter_stderr < 0.01


def test_poisson_gives_small_t_min():
    rng = np.random.default_rng(1)
    hist = spacing_histogram(rng.exponential(size=10_000_000), 0.05, 5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BracketWarning)
        res = fit_t_min(hist)
    assert res.parameter < 0.01


def test_objective_minimal_at_fit(ansatz_hist):
    res = fit_t_min(ansatz_hist, (0.0, 1.0))
    f = t_min_objective(ansatz_hist)
    assert res.objective >= 0
    for t in (0.0, 1.0, t_min_rectangle(1e4)):
        assert res.objective <= f(t)


def test_bracket_edge_flagged(ansatz_hist):
    with pytest.warns(BracketWarning):
        res = fit_t_min(ansatz_hist, (0.2, 0.5))
    assert res.at_bracket_edge and 0.2 <= res.parameter <= 0.5


def test_bad_bracket():
    hist = spacing_histogram(np.array([0.5, 1.0]), 0.05, 5.0)
    with pytest.raises(ValueError):
        fit_t_min(hist, (0.5, 0.1))
    with pytest.raises(ValueError):
        fit_t_min(hist, (0.0, 4.0))


def test_fit_is_deterministic(ansatz_hist):
    assert fit_t_min(ansatz_hist) == fit_t_min(ansatz_hist)


def test_sqrt_coefficient_exact_on_linear_model():
    c = 3.5449
    E = np.array([2500.0, 1e4, 4e4, 1.6e5])
    P = poisson_cumulative_P(0.05) - c / np.sqrt(E)
    res = fit_sqrt_coefficient(np.column_stack([E, P, np.full(E.size, 1e-3)]), 0.05)
    assert res.parameter == pytest.approx(c, abs=1e-6)
    assert res.objective == pytest.approx(0.0, abs=1e-18)


@given(c=st.floats(-10, 10), w=st.lists(st.floats(1e-4, 1e-1), min_size=3, max_size=3))
def test_sqrt_coefficient_exact_any_weights(c, w):
    E = np.array([900.0, 3e3, 2e4])
    P = poisson_cumulative_P(0.1) - c / np.sqrt(E)
    res = fit_sqrt_coefficient(np.column_stack([E, P, w]), 0.1)
    assert res.parameter == pytest.approx(c, abs=1e-9)


def test_sqrt_coefficient_from_exact_form():
    E = np.array([2500.0, 1e4, 4e4])
    P = [ansatz_cumulative_P(0.05, AnsatzParams(t_min_rectangle(e))) for e in E]
    res = fit_sqrt_coefficient(np.column_stack([E, P, np.zeros(3)]), 0.05)
    assert 3.3 <= res.parameter <= 3.6


def test_sqrt_coefficient_needs_three_energies():
    with pytest.raises(ValueError):
        fit_sqrt_coefficient([(1e4, 0.94, 1e-3)] * 3, 0.05)
    with pytest.raises(ValueError):
        fit_sqrt_coefficient([(1e4, 0.94, 1e-3), (2e4, 0.95, 1e-3)], 0.05)


def test_report_text(ansatz_hist):
    text = fit_t_min(ansatz_hist).report("t_min")
    assert "t_min" in text


# -- estimators ----------------------------------------------------------------


def test_tmin_estimator_params_and_clone():
    est = TminEstimator(bin_width=0.1, bracket=(0.0, 0.5))
    assert est.get_params()["bin_width"] == 0.1
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est


def test_tmin_estimator_fit_predict():
    rng = np.random.default_rng(5)
    sp = sample_ansatz_spacings(2_000_000, AnsatzParams(0.2), rng)
    est = TminEstimator().fit(sp)
    assert est.t_min_ == pytest.approx(0.2, abs=0.03)
    assert est.predict([0.0])[0] == pytest.approx(1 - est.t_min_ / math.pi)
    assert est.score(sp) == -est.result_.objective


def test_regressor_fit_predict_score():
    E = np.array([2500.0, 1e4, 4e4])
    y = poisson_cumulative_P(0.05) - 3.0 / np.sqrt(E)
    reg = SqrtScalingRegressor(s=0.05).fit(E.reshape(-1, 1), y, sample_weight=[1.0, 2.0, 3.0])
    assert reg.coef_ == pytest.approx(3.0, abs=1e-9)
    assert np.allclose(reg.predict(E), y)
    assert reg.score(E.reshape(-1, 1), y) == pytest.approx(1.0)
    assert clone(reg).get_params() == {"s": 0.05}
