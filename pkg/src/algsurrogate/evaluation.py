"""Validation metrics, error factors and performance profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .basis import LinearModel, predict
from .dataset import Dataset, Domain
from .errors import ContractViolation

EXTENDED_SEGMENTS = (("lower", 0.4, 0.6), ("training", 0.6, 10.0), ("upper", 10.0, 14.0))


@dataclass(frozen=True)
class EvaluationReport:
    """Validation error of a model.

    ``r2_val`` uses the training-set mean in its denominator, so it can be
    negative.  It is NaN with ``r2_defined=False`` when that denominator is 0.
    """

    rmse_val: float
    r2_val: float
    n_val: int
    training_mean: float
    r2_defined: bool = True


def evaluate(model: LinearModel, validation: Dataset, training_mean: float) -> EvaluationReport:
    if validation.n < 1:
        raise ContractViolation("validation set is empty")
    z = validation.responses
    resid = z - predict(model, validation.inputs)
    sse = float(resid @ resid)
    dev = z - training_mean
    sst = float(dev @ dev)
    rmse = math.sqrt(sse / z.size)
    if sst == 0.0:
        return EvaluationReport(rmse, math.nan, z.size, float(training_mean), False)
    return EvaluationReport(rmse, 1.0 - sse / sst, z.size, float(training_mean), True)


def validation_points(domain: Domain, n: int = 1000, seed: int = 0, *,
                      open_lower: bool = False) -> np.ndarray:
    """``n`` uniform random points over ``domain`` as an (n, d) array.

    Draws cover [lower, upper); with ``open_lower`` they cover (lower, upper]
    instead, for half-open segments such as (10, 14].
    """
    rng = np.random.default_rng(seed)
    u = rng.random((n, domain.dim))
    if open_lower:
        u = 1.0 - u  # in (0, 1]
    return domain.lower + u * domain.width


def segment_points(segment: str, n: int = 1000, seed: int = 0) -> np.ndarray:
    """Uniform points in one extended-domain segment.

    ``lower`` is [0.4, 0.6), ``training`` is [0.6, 10] and ``upper`` is
    (10, 14].
    """
    for name, lo, hi in EXTENDED_SEGMENTS:
        if name == segment:
            return validation_points(Domain.interval(lo, hi), n, seed,
                                     open_lower=(name == "upper"))
    raise ContractViolation(f"unknown segment {segment!r}")


def error_factor(rmse_by_method: Mapping[str, float]) -> dict[str, float]:
    """RMSE of each method over the best one.

    When the best RMSE is 0, exact methods get 1 and the rest infinity (all
    ones when every RMSE is 0).
    """
    if not rmse_by_method:
        raise ContractViolation("error_factor needs at least one method")
    vals = {m: float(v) for m, v in rmse_by_method.items()}
    if any(not v >= 0 or not math.isfinite(v) for v in vals.values()):
        raise ContractViolation("RMSE values must be finite and >= 0")
    best = min(vals.values())
    if best == 0.0:
        return {m: (1.0 if v == 0.0 else math.inf) for m, v in vals.items()}
    return {m: v / best for m, v in vals.items()}


@dataclass(frozen=True)
class ProfileCurve:
    """Fraction of problems with error factor at most each threshold."""

    method: str
    thresholds: np.ndarray
    fractions: np.ndarray


def performance_profile(ef_table: Sequence[Mapping[str, float]]) -> dict[str, ProfileCurve]:
    """Step curves evaluated at every distinct EF value in the table.

    Parameters
    ----------
    ef_table : sequence of mappings
        One mapping per problem, all with the same method keys.
    """
    if not ef_table:
        raise ContractViolation("empty EF table")
    methods = list(ef_table[0].keys())
    for row in ef_table:
        if list(row.keys()) != methods:
            raise ContractViolation("EF table is ragged: every row needs the same methods")
    mat = np.array([[float(row[m]) for m in methods] for row in ef_table])
    thresholds = np.unique(mat[np.isfinite(mat)])
    if thresholds.size == 0:
        thresholds = np.array([1.0])
    curves = {}
    n = mat.shape[0]
    for j, m in enumerate(methods):
        col = np.sort(mat[:, j])
        frac = np.searchsorted(col, thresholds, side="right") / n
        curves[m] = ProfileCurve(m, thresholds.copy(), frac)
    return curves


def write_profile_csv(curves: Mapping[str, ProfileCurve], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "ef", "fraction"])
        for m, c in curves.items():
            for t, f in zip(c.thresholds, c.fractions):
                w.writerow([m, repr(float(t)), repr(float(f))])


@dataclass(frozen=True)
class QualitySummary:
    label: str
    mean: float
    median: float
    std: float
    minimum: float
    maximum: float
    count: int


def summarize(label: str, values: Sequence[float]) -> QualitySummary:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return QualitySummary(label, math.nan, math.nan, math.nan, math.nan, math.nan, 0)
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return QualitySummary(label, float(v.mean()), float(np.median(v)), std,
                          float(v.min()), float(v.max()), int(v.size))


def write_summary_csv(rows: Sequence[QualitySummary], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "mean", "median", "std", "min", "max", "count"])
        for r in rows:
            w.writerow([r.label, repr(r.mean), repr(r.median), repr(r.std), repr(r.minimum),
                        repr(r.maximum), r.count])
