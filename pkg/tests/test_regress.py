import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algsurrogate.errors import ContractViolation
from algsurrogate.regress import (FitnessMetric, big_m, elastic_net_fit, elastic_net_path,
                                  lambda_max, metric_value, ols_fit, sigma_hat_sq)

from oracles import metric_by_hand, normal_equations_ols

METRICS = ["AICc", "HQIC", "MSE", "Cp", "BIC", "RIC"]

# hand-evaluated with plain ``math`` for N=10, p=2, k=13, ssr=0.5, sigma^2=0.05
FROZEN = {"AICc": -24.243037021254192, "HQIC": -26.621192954548086,
          "MSE": 0.07142857142857142, "Cp": 4.0, "BIC": 14.605170185988092,
          "RIC": 20.259797429846145}


def test_ols_constant_column():
    fit = ols_fit(np.ones((3, 1)), [2.0, 2.0, 2.0])
    np.testing.assert_allclose(fit.coefficients, [2.0])
    assert fit.ssr == pytest.approx(0.0, abs=1e-24)


def test_ols_exact_quadratic():
    t = np.array([0.7, 1.3, 2.0, 3.1, 4.4])
    fit = ols_fit((t ** 2)[:, None], 3 * t ** 2)
    np.testing.assert_allclose(fit.coefficients, [3.0], rtol=1e-12)
    assert fit.ssr < 1e-20


@pytest.mark.parametrize("seed", range(10))
def test_ols_matches_elimination_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 13))
    z = rng.normal(size=20)
    beta_o, ssr_o = normal_equations_ols(X, z)
    fit = ols_fit(X, z)
    np.testing.assert_allclose(fit.coefficients, beta_o, rtol=1e-8, atol=1e-10)
    assert fit.ssr == pytest.approx(ssr_o, rel=1e-8)


def test_ols_ssr_is_residual_sum():
    rng = np.random.default_rng(3)
    X, z = rng.normal(size=(15, 4)), rng.normal(size=15)
    fit = ols_fit(X, z, [0, 2])
    r = z - X[:, [0, 2]] @ fit.coefficients
    assert fit.ssr == pytest.approx(float(r @ r), rel=1e-9)


def test_ols_degenerate_min_norm():
    X = np.ones((4, 2))
    fit = ols_fit(X, [1.0] * 4)
    assert fit.degenerate
    np.testing.assert_allclose(fit.coefficients, [0.5, 0.5], atol=1e-12)


def test_ols_empty_active_rejected():
    with pytest.raises(ContractViolation):
        ols_fit(np.ones((3, 2)), [1, 2, 3], [])


@given(st.integers(0, 10_000))
def test_superset_never_raises_ssr(seed):
    rng = np.random.default_rng(seed)
    X, z = rng.normal(size=(12, 6)), rng.normal(size=12)
    sub = sorted(rng.choice(6, 2, replace=False))
    extra = sorted(set(sub) | set(rng.choice(6, 2, replace=False)))
    assert ols_fit(X, z, extra).ssr <= ols_fit(X, z, sub).ssr + 1e-9


def test_sigma_hand_example():
    est = sigma_hat_sq(np.ones((2, 1)), [0.0, 1.0])
    assert est.value == pytest.approx(0.5, rel=1e-15) and not est.floored


def test_sigma_floor_on_exact_fit():
    t = np.linspace(1, 2, 5)
    est = sigma_hat_sq(np.c_[np.ones(5), t], 1 + 2 * t)
    assert est.value == 1e-12 and est.floored


def test_sigma_column_order_invariant():
    rng = np.random.default_rng(1)
    X, z = rng.normal(size=(10, 4)), rng.normal(size=10)
    assert sigma_hat_sq(X, z).value == pytest.approx(sigma_hat_sq(X[:, ::-1], z).value, rel=1e-12)


def test_sigma_needs_two_rows():
    with pytest.raises(ContractViolation):
        sigma_hat_sq(np.ones((1, 1)), [1.0])


@pytest.mark.parametrize("name", METRICS)
def test_metric_frozen_values(name):
    assert metric_value(name, 0.5, 10, 2, 13, 0.05) == pytest.approx(FROZEN[name], abs=1e-10)


@pytest.mark.parametrize("name", METRICS)
def test_metric_matches_hand_oracle(name):
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(8, 40))
        k = int(rng.integers(2, 20))
        p = int(rng.integers(0, min(k, n - 2) + 1))
        ssr, sig = float(rng.uniform(1e-3, 10)), float(rng.uniform(1e-3, 2))
        want = metric_by_hand(name, ssr, n, p, k, sig)
        assert metric_value(name, ssr, n, p, k, sig) == pytest.approx(want, rel=1e-12, abs=1e-10)


def test_forced_identities():
    n, k, ssr = 17, 13, 0.8
    sig = ssr / (n - 1)
    assert metric_value("Cp", ssr, n, k, k, sig) == pytest.approx(2 * k - 1, abs=1e-10)
    assert metric_value("BIC", ssr, n, k, k, sig) == pytest.approx((n - 1) + k * math.log(n),
                                                                   abs=1e-10)


@pytest.mark.parametrize("name", METRICS)
@given(lo=st.floats(1e-6, 1e3), gap=st.floats(1e-9, 1e3))
def test_metric_increasing_in_ssr(name, lo, gap):
    # gap is relative so the two values stay distinguishable after rounding
    hi = lo * (1 + gap)
    assert metric_value(name, lo, 20, 3, 13, 0.1) < metric_value(name, hi, 20, 3, 13, 0.1)


def test_metric_preconditions_name_the_metric():
    with pytest.raises(ContractViolation, match="AICc"):
        metric_value("AICc", 1.0, 4, 3, 5)
    with pytest.raises(ContractViolation, match="BIC"):
        metric_value("BIC", 1.0, 10, 1, 5, None)
    with pytest.raises(ContractViolation, match="MSE"):
        metric_value("MSE", -1.0, 10, 1, 5)


def test_log_metric_floor_is_finite():
    assert math.isfinite(metric_value("HQIC", 0.0, 10, 1, 5))


def test_metric_names_parse_case_insensitive():
    assert FitnessMetric.parse("bic") is FitnessMetric.BIC
    assert FitnessMetric.parse("aicc") is FitnessMetric.AICC


def test_big_m_examples():
    assert big_m(np.ones((2, 1)), [2.0, 2.0]) == pytest.approx(2.0)
    assert big_m(np.ones((3, 2)), [0.0, 0.0, 0.0]) == 1.0


@given(st.integers(0, 10_000))
def test_big_m_bounds_each_coefficient(seed):
    rng = np.random.default_rng(seed)
    X, z = rng.normal(size=(15, 5)), rng.normal(size=15)
    m = big_m(X, z)
    assert np.all(np.abs(ols_fit(X, z).coefficients) <= m + 1e-12)


def test_elastic_net_zero_penalty_is_ols():
    rng = np.random.default_rng(4)
    X = np.c_[np.ones(30), rng.normal(size=(30, 4))]
    z = rng.normal(size=30)
    np.testing.assert_allclose(elastic_net_fit(X, z, 0.0, 1.0).coefficients,
                               ols_fit(X, z).coefficients, atol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_elastic_net_lambda_max_gives_null(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 6)) * rng.uniform(0.1, 10, 6)
    z = rng.normal(size=25)
    lam = lambda_max(X, z, 1.0)
    fit = elastic_net_fit(X, z, lam, 1.0)
    assert np.all(fit.coefficients == 0.0)
    below = elastic_net_fit(X, z, 0.95 * lam, 1.0)
    assert np.any(below.coefficients != 0.0)


def test_scalar_soft_threshold():
    # one unit-RMS column without a constant: beta = S(x.z, lam) / (x.x)
    x = np.array([1.0, -1.0, 1.0, -1.0])
    z = np.array([3.0, -1.0, 2.0, 0.5])
    xz = float(x @ z)
    for lam in (0.0, 0.7, 2.0, 10.0):
        want = math.copysign(max(abs(xz) - lam, 0.0), xz) / float(x @ x)
        got = elastic_net_fit(x[:, None], z, lam, 1.0).coefficients[0]
        assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_lasso_path_l1_norm_monotone(seed):
    rng = np.random.default_rng(100 + seed)
    X = np.c_[np.ones(30), rng.normal(size=(30, 5))]
    z = X @ rng.normal(size=6) + 0.1 * rng.normal(size=30)
    lmax = lambda_max(X, z, 1.0)
    lams = lmax * np.geomspace(1, 1e-3, 15)
    path = elastic_net_path(X, z, lams, 1.0)
    norms = [np.abs(f.standardized).sum() for f in path]
    assert all(b >= a - 1e-9 for a, b in zip(norms, norms[1:]))


def test_elastic_net_rejects_bad_alpha():
    with pytest.raises(ContractViolation):
        elastic_net_fit(np.ones((3, 1)), [1, 2, 3], 1.0, 1.5)
