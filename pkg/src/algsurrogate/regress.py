"""Least squares, fitness metrics, big-M and the elastic-net baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from . import _engine
from .basis import DesignMatrix
from .errors import ContractViolation, ConvergenceError

RANK_RTOL = 1e-10
SIGMA_FLOOR = 1e-12


class FitnessMetric(str, Enum):
    AICC = "AICc"
    HQIC = "HQIC"
    MSE = "MSE"
    CP = "Cp"
    BIC = "BIC"
    RIC = "RIC"

    @classmethod
    def parse(cls, name: "str | FitnessMetric") -> "FitnessMetric":
        if isinstance(name, FitnessMetric):
            return name
        for m in cls:
            if m.value.lower() == str(name).strip().lower():
                return m
        raise ContractViolation(
            f"unknown metric {name!r}; choose from {[m.value for m in cls]}")

    @property
    def code(self) -> int:
        return list(FitnessMetric).index(self)

    @property
    def needs_sigma(self) -> bool:
        return self in (FitnessMetric.CP, FitnessMetric.BIC, FitnessMetric.RIC)

    @property
    def uses_log(self) -> bool:
        return self in (FitnessMetric.AICC, FitnessMetric.HQIC)

    @property
    def needs_dof(self) -> bool:
        return self in (FitnessMetric.AICC, FitnessMetric.MSE)


@dataclass(frozen=True)
class FitResult:
    """Least-squares (or penalized) fit on a set of active columns.

    ``degenerate`` is set when the active columns are numerically rank
    deficient and the minimum-norm solution was returned.
    """

    coefficients: np.ndarray
    ssr: float
    active: tuple[int, ...] = ()
    degenerate: bool = False
    rank: int = 0
    standardized: np.ndarray | None = None
    sweeps: int = 0


class NoiseEstimate(NamedTuple):
    value: float
    floored: bool


def _matrix(X) -> np.ndarray:
    return X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)


def _lstsq(A: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, int]:
    """Minimum-norm least squares on equilibrated columns.

    Columns are scaled to unit norm before the SVD so the rank cut reflects
    collinearity rather than units; the returned coefficients are unscaled.
    """
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    beta_s, _, rank, _ = np.linalg.lstsq(A / norms, z, rcond=RANK_RTOL)
    return beta_s / norms, int(rank)


def ols_fit(X, z, active: Sequence[int] | None = None) -> FitResult:
    """Ordinary least squares on the ``active`` columns of ``X``.

    Parameters
    ----------
    X : DesignMatrix or ndarray, shape (N, k)
    z : ndarray, shape (N,)
    active : sequence of int, optional
        Column indices; all columns when omitted.

    Returns
    -------
    FitResult
        One coefficient per active column; ``ssr`` is recomputed from the
        residual vector.
    """
    A = _matrix(X)
    z = np.asarray(z, dtype=float).reshape(-1)
    if A.shape[0] < 1:
        raise ContractViolation("ols_fit needs at least one row")
    if A.shape[0] != z.size:
        raise ContractViolation("row count of X and length of z differ")
    act = tuple(range(A.shape[1])) if active is None else tuple(int(a) for a in active)
    if not act:
        raise ContractViolation("ols_fit requires a non-empty active set")
    sub = A[:, list(act)]
    beta, rank = _lstsq(sub, z)
    r = z - sub @ beta
    return FitResult(beta, float(r @ r), act, rank < len(act), rank)


def sigma_hat_sq(X, z) -> NoiseEstimate:
    """Residual variance of the full k-term fit, SSR / (N - 1).

    Exact fits are floored at 1e-12 and reported with ``floored=True``.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size < 2:
        raise ContractViolation("sigma_hat_sq needs N >= 2")
    fit = ols_fit(X, z)
    value = fit.ssr / (z.size - 1)
    if value < SIGMA_FLOOR:
        return NoiseEstimate(SIGMA_FLOOR, True)
    return NoiseEstimate(value, False)


def metric_value(metric, ssr: float, n: int, p: int, k: int,
                 sigma_sq: float | None = None) -> float:
    """Value of a fitness metric for a model with ``p`` terms out of ``k``.

    Log-based metrics floor ``ssr`` at 1e-300 (see :func:`metric_floored`).
    """
    metric = FitnessMetric.parse(metric)
    if ssr < 0 or not math.isfinite(ssr):
        raise ContractViolation(f"{metric.value}: ssr must be finite and >= 0")
    if n < 1 or p < 0 or k < 1 or p > k:
        raise ContractViolation(f"{metric.value}: need n >= 1, 0 <= p <= k")
    if metric.needs_dof and n <= p + 1:
        raise ContractViolation(f"{metric.value}: requires N > p + 1 (N={n}, p={p})")
    if metric == FitnessMetric.HQIC and n < 2:
        raise ContractViolation("HQIC: requires N >= 2")
    if metric.needs_sigma:
        if sigma_sq is None or not sigma_sq > 0:
            raise ContractViolation(f"{metric.value}: requires sigma_sq > 0")
    else:
        sigma_sq = 1.0
    return float(_engine.metric_formula(metric.code, float(ssr), n, p, k, float(sigma_sq)))


def metric_floored(metric, ssr: float) -> bool:
    return FitnessMetric.parse(metric).uses_log and ssr < _engine.SSR_FLOOR


def big_m(X, z) -> float:
    """Sum of absolute full-model OLS coefficients (1.0 when z is identically zero)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.any(z):
        return 1.0
    m = float(np.sum(np.abs(ols_fit(X, z).coefficients)))
    return m if m > 0 else 1.0


@njit(cache=True)
def _cd_loop(XtT, z, beta, lam_l1, lam_l2, tol, max_sweeps):
    # XtT holds one standardized column per row so each column is contiguous
    k = XtT.shape[0]
    col_sq = np.zeros(k)
    for j in range(k):
        col_sq[j] = XtT[j] @ XtT[j]
    r = z - XtT.T @ beta
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        max_beta = 0.0
        for j in range(k):
            old = beta[j]
            rho = XtT[j] @ r + col_sq[j] * old
            if rho > lam_l1:
                new = (rho - lam_l1) / (col_sq[j] + 2.0 * lam_l2)
            elif rho < -lam_l1:
                new = (rho + lam_l1) / (col_sq[j] + 2.0 * lam_l2)
            else:
                new = 0.0
            if new != old:
                r -= (new - old) * XtT[j]
                beta[j] = new
            delta = abs(new - old)
            if delta > max_delta:
                max_delta = delta
            if abs(new) > max_beta:
                max_beta = abs(new)
        if max_delta <= tol * max(1.0, max_beta):
            return sweep, max_delta
    return -1, max_delta


class _Standardizer:
    """Column standardization for the elastic net.

    With a constant column present, the other columns are centered and
    scaled to unit variance; the constant column is left as is and absorbs
    the shift.  Without one, columns are only scaled to unit root-mean-square,
    because centering would change the span of X.
    """

    def __init__(self, A: np.ndarray):
        n = A.shape[0]
        spread = np.ptp(A, axis=0)
        self.const = spread == 0
        has_const = bool(np.any(self.const & (A[0] != 0)))
        self.center = np.where(~self.const & has_const, A.mean(axis=0), 0.0)
        scale = np.sqrt(np.sum((A - self.center) ** 2, axis=0) / n)
        scale[self.const] = 1.0
        scale[scale == 0] = 1.0
        self.scale = scale
        self.const_col = int(np.flatnonzero(self.const & (A[0] != 0))[0]) if has_const else -1
        self.const_val = float(A[0, self.const_col]) if has_const else 1.0

    def transform(self, A: np.ndarray) -> np.ndarray:
        return (A - self.center) / self.scale

    def to_original(self, beta_t: np.ndarray) -> np.ndarray:
        beta = beta_t / self.scale
        if self.const_col >= 0:
            shift = float(np.sum(beta * self.center))
            beta = beta.copy()
            beta[self.const_col] -= shift / self.const_val
        return beta


def lambda_max(X, z, alpha: float = 1.0) -> float:
    """Smallest penalty at which every elastic-net coefficient is zero."""
    A = _matrix(X)
    z = np.asarray(z, dtype=float).reshape(-1)
    if alpha <= 0:
        return math.inf
    Xt = _Standardizer(A).transform(A)
    return float(np.max(np.abs(Xt.T @ z)) / alpha)


def elastic_net_fit(X, z, lam: float, alpha: float, *, tol: float = 1e-8,
                    max_sweeps: int = 100_000, warm_start: np.ndarray | None = None
                    ) -> FitResult:
    """Coordinate-descent elastic net on standardized columns.

    Minimizes ``0.5*||z - Xb||^2 + lam*alpha*||b||_1 + (1-alpha)*lam*||b||_2^2``
    in the standardized coordinates; coefficients are reported on the
    original scale (``standardized`` keeps the internal ones).
    """
    if lam < 0 or not 0 <= alpha <= 1:
        raise ContractViolation("elastic net needs lam >= 0 and 0 <= alpha <= 1")
    A = _matrix(X)
    z = np.asarray(z, dtype=float).reshape(-1)
    std = _Standardizer(A)
    Xt = std.transform(A)
    if alpha > 0 and lam * alpha >= np.max(np.abs(Xt.T @ z)):
        # zero satisfies the optimality conditions; skip the sweeps so round-off
        # cannot leave tiny nonzero coefficients at lambda_max
        return FitResult(np.zeros(A.shape[1]), float(z @ z), tuple(range(A.shape[1])), False,
                         0, np.zeros(A.shape[1]), 0)
    beta = np.zeros(A.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    sweeps, delta = _cd_loop(np.ascontiguousarray(Xt.T), z, beta, lam * alpha, lam * (1 - alpha), tol, max_sweeps)
    if sweeps < 0:
        r = z - Xt @ beta
        raise ConvergenceError(
            f"elastic net did not converge in {max_sweeps} sweeps "
            f"(last coordinate change {delta:.3e}, residual norm {np.linalg.norm(r):.3e})")
    coef = std.to_original(beta)
    r = z - A @ coef
    return FitResult(coef, float(r @ r), tuple(range(A.shape[1])), False,
                     int(np.count_nonzero(beta)), beta.copy(), sweeps)


def elastic_net_path(X, z, lambdas: Sequence[float], alpha: float = 1.0, **kw) -> list[FitResult]:
    """Warm-started fits along ``lambdas`` (largest first is the usual order)."""
    out = []
    warm = None
    for lam in lambdas:
        fit = elastic_net_fit(X, z, lam, alpha, warm_start=warm, **kw)
        warm = fit.standardized
        out.append(fit)
    return out
