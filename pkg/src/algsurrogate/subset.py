"""Exact best-subset selection.

Two formulations are offered.  The cardinality form finds the SSR-minimal
subset with at most ``r`` columns; sweeping ``r`` and scoring each optimum
with a fitness metric yields the metric-optimal model because every metric
here depends on the subset only through (SSR, p).  The direct form
minimizes the metric over all 2^k subsets at once.

Both are solved exactly, by exhaustive enumeration (k <= 16 by default) or by
branch-and-bound; see :mod:`algsurrogate._engine`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _engine
from .basis import BasisSpec, DesignMatrix, LinearModel
from .errors import ContractViolation
from .regress import (FitnessMetric, big_m, metric_value, ols_fit, sigma_hat_sq)

EXHAUSTIVE_MAX_K = 16
METRIC_TIE_TOL = 1e-9


@dataclass(frozen=True)
class SubsetSolution:
    active: tuple[int, ...]
    coefficients: np.ndarray
    ssr: float
    metric_value: float
    cardinality: int
    metric: FitnessMetric
    proof: str
    nodes: int = 0
    sigma_sq: float = 1.0
    big_m: float = math.nan
    flags: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    spec: BasisSpec | None = field(default=None, compare=False)

    def model(self, spec: BasisSpec | None = None, **kw) -> LinearModel:
        spec = spec or self.spec
        if spec is None:
            raise ContractViolation("no basis spec attached to this solution")
        return LinearModel(spec, self.active, self.coefficients, **kw)


def _prepare(X, z):
    A = X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    z = np.ascontiguousarray(np.asarray(z, dtype=float).reshape(-1))
    if A.ndim != 2 or A.shape[0] != z.size:
        raise ContractViolation("X rows and z length differ")
    if A.shape[0] < 2:
        raise ContractViolation("subset selection needs N >= 2")
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return A, z, np.ascontiguousarray(A / norms)


def _engine_name(k: int, engine: str) -> str:
    if engine == "auto":
        return "exhaustive" if k <= EXHAUSTIVE_MAX_K else "branch-and-bound"
    if engine not in ("exhaustive", "branch-and-bound"):
        raise ContractViolation(f"unknown engine {engine!r}")
    return engine


def _sigma(metric: FitnessMetric, A, z) -> tuple[float, tuple[str, ...]]:
    if not metric.needs_sigma:
        return 1.0, ()
    est = sigma_hat_sq(A, z)
    return est.value, (("sigma_floor",) if est.floored else ())


def _safe_metric(metric, ssr, n, p, k, sig) -> float:
    try:
        return metric_value(metric, ssr, n, p, k, sig)
    except ContractViolation:
        return math.inf


def _finish(A, z, active, metric, sig, sig_flags, proof, nodes, spec, notes=()):
    n, k = A.shape
    active = tuple(sorted(int(a) for a in active))
    flags = list(sig_flags)
    if active:
        fit = ols_fit(A, z, active)
        coef, ssr = fit.coefficients, fit.ssr
        if fit.degenerate:
            flags.append("degenerate")
    else:
        coef, ssr = np.zeros(0), float(z @ z)
    value = _safe_metric(metric, ssr, n, len(active), k, sig)
    if not math.isfinite(value):
        flags.append("metric_undefined")
    if metric.uses_log and ssr < _engine.SSR_FLOOR:
        flags.append("ssr_floor")
    m = big_m(A, z)
    if coef.size and np.any(np.abs(coef) > m * (1 + 1e-9)):
        flags.append("big_m_too_small")
    return SubsetSolution(active, coef, ssr, value, len(active), metric, proof, int(nodes),
                          sig, m, tuple(flags), tuple(notes), spec)


def _unpack(best, p) -> tuple[int, ...]:
    return tuple(int(i) for i in best[:p])


def best_subset_cardinality(X, z, r: int, metric="BIC", *, engine: str = "auto"
                            ) -> SubsetSolution:
    """SSR-minimal subset with at most ``r`` columns, scored with ``metric``."""
    metric = FitnessMetric.parse(metric)
    A, z, Xs = _prepare(X, z)
    n, k = A.shape
    if not 1 <= r <= k:
        raise ContractViolation(f"cardinality r must be in [1, {k}], got {r}")
    eng = _engine_name(k, engine)
    sig, sflags = _sigma(metric, A, z)
    best, p, _, _, nodes = _engine.search(Xs, z, False, r, metric.code, sig, k,
                                          eng == "branch-and-bound", METRIC_TIE_TOL)
    spec = X.spec if isinstance(X, DesignMatrix) else None
    return _finish(A, z, _unpack(best, p), metric, sig, sflags, eng, nodes, spec)


def branch_and_bound(X, z, r: int | None = None, metric="BIC") -> SubsetSolution:
    """Branch-and-bound engine: cardinality form when ``r`` is given, else direct."""
    if r is None:
        return best_subset_metric(X, z, metric, "direct", engine="branch-and-bound")
    return best_subset_cardinality(X, z, r, metric, engine="branch-and-bound")


def exhaustive_search(X, z, r: int | None = None, metric="BIC") -> SubsetSolution:
    if r is None:
        return best_subset_metric(X, z, metric, "direct", engine="exhaustive")
    return best_subset_cardinality(X, z, r, metric, engine="exhaustive")


def _better(cand: SubsetSolution, inc: SubsetSolution | None) -> bool:
    if inc is None:
        return True
    if cand.metric_value < inc.metric_value - METRIC_TIE_TOL:
        return True
    if cand.metric_value <= inc.metric_value + METRIC_TIE_TOL:
        if cand.cardinality != inc.cardinality:
            return cand.cardinality < inc.cardinality
        return cand.active < inc.active
    return False


def best_subset_metric(X, z, metric="BIC", strategy: str = "direct", *,
                       engine: str = "auto") -> SubsetSolution:
    """Metric-optimal model over all column subsets.

    Parameters
    ----------
    strategy : {"direct", "sweep"}
        ``direct`` searches all 2^k subsets against the metric; ``sweep``
        solves the cardinality problem for every r = 1..k (plus the null
        model) and keeps the best-scoring optimum.
    engine : {"auto", "exhaustive", "branch-and-bound"}
    """
    metric = FitnessMetric.parse(metric)
    A, z, Xs = _prepare(X, z)
    n, k = A.shape
    eng = _engine_name(k, engine)
    sig, sflags = _sigma(metric, A, z)
    spec = X.spec if isinstance(X, DesignMatrix) else None
    prune = eng == "branch-and-bound"

    if strategy == "direct":
        best, p, _, _, nodes = _engine.search(Xs, z, True, k, metric.code, sig, k, prune,
                                              METRIC_TIE_TOL)
        return _finish(A, z, _unpack(best, p), metric, sig, sflags, eng, nodes, spec)
    if strategy != "sweep":
        raise ContractViolation(f"unknown strategy {strategy!r}")

    incumbent = _finish(A, z, (), metric, sig, sflags, eng, 1, spec)
    nodes = 1
    skipped = []
    for r in range(1, k + 1):
        if metric.needs_dof and n <= r + 1:
            skipped.append(r)
            continue
        best, p, _, _, cnt = _engine.search(Xs, z, False, r, metric.code, sig, k, prune,
                                            METRIC_TIE_TOL)
        nodes += cnt
        cand = _finish(A, z, _unpack(best, p), metric, sig, sflags, eng, 0, spec)
        if _better(cand, incumbent):
            incumbent = cand
    notes = (f"cardinalities {skipped} skipped: N <= p + 1",) if skipped else ()
    return SubsetSolution(incumbent.active, incumbent.coefficients, incumbent.ssr,
                          incumbent.metric_value, incumbent.cardinality, metric, eng, nodes,
                          sig, incumbent.big_m, incumbent.flags, notes, spec)


def ssr_profile(X, z, *, engine: str = "auto") -> list[SubsetSolution]:
    """Cardinality optima for r = 1..k (scored with BIC)."""
    A = X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    return [best_subset_cardinality(X, z, r, "BIC", engine=engine) for r in range(1, A.shape[1] + 1)]


def fit_subset(dm: DesignMatrix, z: Sequence[float], metric="BIC", **kw) -> LinearModel:
    """Convenience wrapper: metric-optimal model as a :class:`LinearModel`."""
    return best_subset_metric(dm, z, metric, **kw).model(dm.spec)
