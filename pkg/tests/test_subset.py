import math
from itertools import combinations

import numpy as np
import pytest

from algsurrogate.basis import BasisSpec, expand, rich_basis
from algsurrogate.errors import ContractViolation
from algsurrogate.kinetics import series_concentration
from algsurrogate.regress import metric_value, ols_fit, sigma_hat_sq
from algsurrogate.sampling import lhs_design
from algsurrogate.dataset import Domain
from algsurrogate.subset import (best_subset_cardinality, best_subset_metric, branch_and_bound,
                                 exhaustive_search)

from oracles import enumerate_best_metric, enumerate_best_ssr

METRICS = ["AICc", "HQIC", "MSE", "Cp", "BIC", "RIC"]


def _instance(seed, n=20, k=10):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k))
    beta = np.where(rng.random(k) < 0.4, rng.normal(size=k), 0.0)
    return X, X @ beta + 0.1 * rng.normal(size=n)


def test_single_term_recovery():
    t = np.linspace(0.7, 3, 9)
    X = expand(t, BasisSpec.parse("pow:1 pow:2 log"))
    sol = best_subset_cardinality(X, 3 * t ** 2, 1)
    assert sol.active == (1,) and sol.ssr < 1e-18


def test_full_cardinality_is_ols():
    X, z = _instance(1)
    sol = best_subset_cardinality(X, z, 10)
    assert sol.ssr == pytest.approx(ols_fit(X, z).ssr, rel=1e-9)


@pytest.mark.parametrize("seed", range(50))
def test_cardinality_matches_enumeration(seed):
    X, z = _instance(seed)
    r = 1 + seed % 10
    sol = best_subset_cardinality(X, z, r)
    assert sol.ssr == pytest.approx(enumerate_best_ssr(X, z, r), rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_branch_and_bound_matches_enumeration(seed):
    X, z = _instance(1000 + seed, 20, 13)
    bb = branch_and_bound(X, z, 5)
    ex = exhaustive_search(X, z, 5)
    assert bb.ssr == pytest.approx(ex.ssr, rel=1e-9)
    assert bb.ssr == pytest.approx(enumerate_best_ssr(X, z, 5), rel=1e-8)
    total = sum(math.comb(13, i) for i in range(6))
    assert bb.nodes <= total


@pytest.mark.parametrize("seed", range(20))
def test_ssr_non_increasing_in_r(seed):
    X, z = _instance(200 + seed)
    ssr = [best_subset_cardinality(X, z, r).ssr for r in range(1, 11)]
    assert all(b <= a + 1e-9 for a, b in zip(ssr, ssr[1:]))


@pytest.mark.parametrize("seed", range(30))
def test_sweep_equals_direct(seed):
    X, z = _instance(300 + seed)
    metric = METRICS[seed % 6]
    a = best_subset_metric(X, z, metric, "sweep")
    b = best_subset_metric(X, z, metric, "direct")
    assert a.metric_value == pytest.approx(b.metric_value, abs=1e-9)


@pytest.mark.parametrize("metric", METRICS)
def test_direct_matches_metric_enumeration(metric):
    X, z = _instance(77, 16, 8)
    sig = sigma_hat_sq(X, z).value
    sol = best_subset_metric(X, z, metric, "direct")
    assert sol.metric_value == pytest.approx(enumerate_best_metric(X, z, metric, sig), abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_solution_is_self_consistent(seed):
    X, z = _instance(400 + seed)
    sol = best_subset_metric(X, z, METRICS[seed % 6])
    if sol.active:
        fit = ols_fit(X, z, sol.active)
        assert fit.ssr == pytest.approx(sol.ssr, rel=1e-9, abs=1e-12)
        np.testing.assert_allclose(fit.coefficients, sol.coefficients, rtol=1e-8, atol=1e-10)
    assert list(sol.active) == sorted(set(sol.active))
    again = metric_value(sol.metric, max(sol.ssr, 1e-300), 20, sol.cardinality, 10,
                         sol.sigma_sq)
    assert again == pytest.approx(sol.metric_value, abs=1e-9)


def test_exact_single_column_wins_under_bic():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(15, 6))
    z = 2.5 * X[:, 3] + 1e-6 * rng.normal(size=15)
    assert best_subset_metric(X, z, "BIC").active == (3,)


def test_big_m_flag_is_reported():
    X, z = _instance(8)
    sol = best_subset_metric(X, z, "BIC")
    assert math.isfinite(sol.big_m)
    if np.any(np.abs(sol.coefficients) > sol.big_m):
        assert "big_m_too_small" in sol.flags


def test_tie_break_prefers_smaller_then_lexicographic():
    # columns 0 and 1 are identical: equal SSR, lexicographic order decides
    t = np.linspace(1, 2, 8)
    X = np.c_[t, t, t ** 2]
    sol = best_subset_cardinality(X, 2 * t, 1)
    assert sol.active == (0,)


def test_aicc_skips_infeasible_cardinalities():
    X, z = _instance(9, 6, 5)
    sol = best_subset_metric(X, z, "AICc", "sweep")
    assert sol.notes and "skipped" in sol.notes[0]


def test_precondition_errors():
    X, z = _instance(0)
    with pytest.raises(ContractViolation):
        best_subset_cardinality(X, z, 0)
    with pytest.raises(ContractViolation):
        best_subset_metric(X[:1], z[:1])


def test_rich_basis_series_reproduces_training():
    t = lhs_design(20, Domain.interval(0.6, 10), 0)[:, 0]
    X = expand(t, rich_basis())
    for sp in "ABC":
        z = series_concentration(0.42, 0.97, sp, t)
        sol = best_subset_metric(X, z, "BIC")
        r2 = 1 - sol.ssr / float(((z - z.mean()) ** 2).sum())
        assert r2 >= 0.999


def test_engine_subtree_is_exhaustive_for_small_k():
    X, z = _instance(11, 12, 6)
    sol = exhaustive_search(X, z, 3)
    best = min((float(np.linalg.lstsq(X[:, list(c)], z, rcond=None)[1].sum() if len(c) else z @ z), c)
               for s in range(1, 4) for c in combinations(range(6), s))
    assert sol.ssr == pytest.approx(best[0], rel=1e-9)
