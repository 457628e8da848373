"""Constrained regression: response and slope bounds enforced over a domain.

A constraint asks that ``f(x, zhat(x)) <= 0`` for every ``x`` in a box chi.
At a fixed ``x`` this is a linear inequality in the coefficients, so the
semi-infinite problem is attacked by cutting planes: fit with a finite set of
points, locate the worst violation over chi, add it, refit.

The fit at each stage is an exact metric-optimal subset search in which every
subset is solved as an inequality-constrained least-squares problem.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from . import _engine
from .basis import DesignMatrix, LinearModel
from .dataset import Domain
from .errors import ContractViolation, InfeasibleError
from .regress import FitnessMetric, metric_value
from .subset import METRIC_TIE_TOL, SubsetSolution, _sigma, best_subset_metric

CONSTRAINT_KINDS = ("lower", "upper", "deriv_lower", "deriv_upper")
GRID_POINTS = 2001
REFINE_RTOL = 1e-8
MAX_SIP_ITER = 50
MAX_CUTS = 200
MAX_CONSTRAINED_K = 20
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ResponseConstraint:
    """A bound on the model response (or its first derivative) over ``chi``.

    ``lower``: zhat(x) >= level; ``upper``: zhat(x) <= level; the
    ``deriv_`` kinds bound d zhat / dx along input ``wrt``.
    """

    kind: str
    level: float
    chi: Domain
    wrt: int = 0

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ContractViolation(f"constraint kind must be one of {CONSTRAINT_KINDS}")
        if not math.isfinite(self.level):
            raise ContractViolation("constraint level must be finite")
        if not isinstance(self.chi, Domain):
            raise ContractViolation("chi must be a Domain")

    @property
    def is_derivative(self) -> bool:
        return self.kind.startswith("deriv")

    @property
    def sign(self) -> float:
        """+1 for upper-type (a.b <= level), -1 for lower-type."""
        return 1.0 if self.kind.endswith("upper") else -1.0

    def violation(self, model: LinearModel, points) -> np.ndarray:
        """f(x, zhat(x)) at each point; positive means violated."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.chi.dim)
        if self.is_derivative:
            vals = model.derivative(pts, self.wrt)
        else:
            vals = model.predict(pts)
        return self.sign * (vals - self.level)

    def cut(self, spec, x) -> tuple[np.ndarray, float]:
        """Linear inequality row ``a . beta <= b`` over all basis columns at ``x``."""
        pt = np.asarray(x, dtype=float).reshape(1, -1)
        phi = spec.derivative(pt, self.wrt)[0] if self.is_derivative else spec.evaluate(pt)[0]
        return self.sign * phi, self.sign * self.level

    def describe(self) -> str:
        lo = ",".join(f"{v:g}" for v in self.chi.lower)
        hi = ",".join(f"{v:g}" for v in self.chi.upper)
        return f"{self.kind} {self.level:g} on [{lo}; {hi}]"

    def to_line(self) -> str:
        return f"{self.kind}, {self.level!r}, {float(self.chi.lower[0])!r}, {float(self.chi.upper[0])!r}"

    @classmethod
    def parse(cls, line: str) -> "ResponseConstraint":
        """Parse ``kind, level, chi_lo, chi_hi`` (commas or whitespace)."""
        parts = line.replace(",", " ").split()
        if len(parts) != 4:
            raise ContractViolation(f"constraint line needs kind, level, chi_lo, chi_hi: {line!r}")
        try:
            level, lo, hi = (float(v) for v in parts[1:])
        except ValueError as exc:
            raise ContractViolation(f"bad number in constraint line {line!r}") from exc
        return cls(parts[0].lower(), level, Domain.interval(lo, hi))


def bound_constraints(lower: float, upper: float, chi: Domain) -> list[ResponseConstraint]:
    return [ResponseConstraint("lower", lower, chi), ResponseConstraint("upper", upper, chi)]


def max_violation(model: LinearModel, constraint: ResponseConstraint,
                  grid_points: int = GRID_POINTS) -> tuple[np.ndarray, float]:
    """Worst violation of ``constraint`` over its domain.

    A uniform grid locates the best cell; golden-section search then refines
    inside the two neighbouring cells down to ``1e-8`` of the domain width.
    Only one-dimensional domains are supported.

    Returns
    -------
    (point, value)
        ``value > 0`` means the constraint is violated at ``point``.
    """
    chi = constraint.chi
    if chi.dim != 1:
        raise ContractViolation("max_violation supports one-dimensional domains only")
    if grid_points < 3:
        raise ContractViolation("grid_points must be >= 3")
    lo, hi = float(chi.lower[0]), float(chi.upper[0])
    grid = np.linspace(lo, hi, grid_points)
    vals = constraint.violation(model, grid)
    i = int(np.argmax(vals))
    best_x, best_v = grid[i], float(vals[i])

    def f(t):
        return float(constraint.violation(model, [t])[0])

    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
    stop = REFINE_RTOL * (hi - lo)
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > stop:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    for x, v in ((c, fc), (d, fd)):
        if v > best_v:
            best_x, best_v = x, v
    return np.array([best_x]), best_v


@dataclass(frozen=True)
class ConstraintCheck:
    constraint: ResponseConstraint
    argmax: np.ndarray
    violation: float
    satisfied: bool


@dataclass(frozen=True)
class CertificationReport:
    checks: tuple[ConstraintCheck, ...]
    tol: float

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    @property
    def max_violation(self) -> float:
        return max((c.violation for c in self.checks), default=-math.inf)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "level", "chi_lo", "chi_hi", "argmax", "violation", "satisfied"])
            for c in self.checks:
                w.writerow([c.constraint.kind, repr(float(c.constraint.level)),
                            repr(float(c.constraint.chi.lower[0])),
                            repr(float(c.constraint.chi.upper[0])),
                            repr(float(c.argmax[0])), repr(float(c.violation)),
                            int(c.satisfied)])


def certify(model: LinearModel, constraints: Sequence[ResponseConstraint],
            tol: float = 1e-6) -> CertificationReport:
    """Check every constraint with :func:`max_violation`; the model is not changed."""
    checks = []
    for con in constraints:
        x, v = max_violation(model, con)
        checks.append(ConstraintCheck(con, x, v, v <= tol))
    return CertificationReport(tuple(checks), tol)


def constrained_lstsq(A: np.ndarray, z: np.ndarray, C: np.ndarray, d: np.ndarray
                      ) -> np.ndarray | None:
    """Least squares ``min ||z - A b||`` subject to ``C b <= d``; None if infeasible.

    The problem is reduced to a least-distance program through an SVD of the
    column-equilibrated ``A`` and solved with non-negative least squares.
    Singular values below 1e-10 of the largest are raised to that level, which
    adds a negligible ridge on numerically dependent directions.
    """
    n, p = A.shape
    if C.shape[0] == 0:
        norms = _col_norms(A)
        beta, *_ = np.linalg.lstsq(A / norms, z, rcond=_engine.RANK_TOL)
        return beta / norms
    norms = _col_norms(A)
    As = A / norms
    Cs = C / norms
    U, s, Vt = np.linalg.svd(As, full_matrices=True)
    sig = np.zeros(p)
    sig[:s.size] = s
    floor = _engine.RANK_TOL * (sig.max() if sig.size and sig.max() > 0 else 1.0)
    sig = np.maximum(sig, floor)
    c = np.zeros(p)
    m = min(n, p)
    c[:m] = (U.T @ z)[:m]
    # beta_s = V diag(1/sig) (w + c); least distance in w
    M = (Cs @ Vt.T) / sig
    G = -M
    h = M @ c - d
    rn = np.linalg.norm(np.column_stack([G, h]), axis=1)
    rn[rn == 0] = 1.0
    G = G / rn[:, None]
    h = h / rn
    E = np.vstack([G.T, h.reshape(1, -1)])
    f = np.zeros(p + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * max(E.shape))
    r = E @ u - f
    if np.linalg.norm(r) <= 1e-10 or r[-1] >= 0:
        return None
    w = -r[:p] / r[-1]
    beta_s = Vt.T @ ((w + c) / sig)
    return beta_s / norms


def _col_norms(A):
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return norms


@dataclass(frozen=True)
class ConstrainedSolution(SubsetSolution):
    """Metric-optimal constrained model plus cutting-plane bookkeeping."""

    converged: bool = False
    iterations: int = 0
    cuts: tuple[tuple[int, float], ...] = ()
    report: CertificationReport | None = field(default=None, compare=False)
    history: tuple[tuple[float, float], ...] = ()


def _constrained_search(A, z, metric, sig, rows, rhs, lb_ssr):
    """Exact metric-optimal subset under linear cuts.

    Subsets are visited in order of their unconstrained metric, a lower
    bound on the constrained one; the scan stops once that bound exceeds the
    incumbent.
    """
    n, k = A.shape
    p_of = np.array([bin(m).count("1") for m in range(1 << k)])
    lb = np.array([_engine.metric_formula(metric.code, lb_ssr[m], n, int(p_of[m]), k, sig)
                   for m in range(1 << k)])
    order = np.lexsort((np.arange(1 << k), p_of, lb))
    best = None
    for mask in order:
        if best is not None and lb[mask] > best[0] + METRIC_TIE_TOL + 1e-9 * abs(best[0]):
            break
        if not math.isfinite(lb[mask]):
            break
        active = tuple(j for j in range(k) if mask >> j & 1)
        if active:
            beta = constrained_lstsq(A[:, list(active)], z, rows[:, list(active)], rhs)
            if beta is None:
                continue
            res = z - A[:, list(active)] @ beta
            ssr = float(res @ res)
        else:
            if np.any(rhs < 0):
                continue
            beta, ssr = np.zeros(0), float(z @ z)
        value = _engine.metric_formula(metric.code, ssr, n, len(active), k, sig)
        cand = (value, len(active), active, beta, ssr)
        if best is None or _prefer(cand, best):
            best = cand
    return best


def _prefer(cand, inc) -> bool:
    if cand[0] < inc[0] - METRIC_TIE_TOL:
        return True
    if cand[0] <= inc[0] + METRIC_TIE_TOL:
        if cand[1] != inc[1]:
            return cand[1] < inc[1]
        return cand[2] < inc[2]
    return False


def _contradictions(constraints) -> tuple[int, int] | None:
    for i, a in enumerate(constraints):
        for j, b in enumerate(constraints):
            if a.is_derivative != b.is_derivative or a.wrt != b.wrt:
                continue
            if a.sign < 0 < b.sign and a.level > b.level:
                if np.all(a.chi.lower <= b.chi.upper) and np.all(b.chi.lower <= a.chi.upper):
                    return i, j
    return None


def _infeasible_pair(A, rows, rhs, cut_owner, n_con):
    for i in range(n_con):
        for j in range(i, n_con):
            sel = np.isin(cut_owner, (i, j))
            if sel.any() and constrained_lstsq(A, np.zeros(A.shape[0]), rows[sel], rhs[sel]) is None:
                return i, j
    return None


def sip_fit(X: DesignMatrix, z, metric="BIC", constraints: Sequence[ResponseConstraint] = (),
            tol_sip: float | None = None, *, max_iter: int = MAX_SIP_ITER,
            max_cuts: int = MAX_CUTS) -> ConstrainedSolution:
    """Metric-optimal model whose response honours ``constraints`` over their domains.

    Parameters
    ----------
    X : DesignMatrix
        Training design; its basis spec is used to evaluate the model on chi.
    tol_sip : float, optional
        Accepted violation; defaults to ``1e-6 * max|z|``.
    max_iter, max_cuts : int
        Outer-iteration and accumulated-cut caps; hitting either leaves the
        result flagged ``sip_unconverged``.

    Raises
    ------
    InfeasibleError
        When no subset admits coefficients meeting the cuts, naming the
        constraint pair found to conflict.
    """
    if not isinstance(X, DesignMatrix):
        raise ContractViolation("sip_fit needs a DesignMatrix (its basis defines the model)")
    constraints = list(constraints)
    if not constraints:
        raise ContractViolation("sip_fit needs at least one constraint")
    metric = FitnessMetric.parse(metric)
    A = X.values
    z = np.asarray(z, dtype=float).reshape(-1)
    n, k = A.shape
    if k > MAX_CONSTRAINED_K:
        raise ContractViolation(f"constrained search supports k <= {MAX_CONSTRAINED_K}")
    if tol_sip is None:
        tol_sip = 1e-6 * max(float(np.max(np.abs(z))), 1.0)
    if not tol_sip > 0:
        raise ContractViolation("tol_sip must be positive")
    pair = _contradictions(constraints)
    if pair is not None:
        a, b = (constraints[i].describe() for i in pair)
        raise InfeasibleError(f"contradictory constraints: {a} vs {b}")

    spec = X.spec
    sig, sflags = _sigma(metric, A, z)
    sol = best_subset_metric(X, z, metric, "direct")
    active, coef = sol.active, sol.coefficients
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    lb_ssr = None
    rows = np.zeros((0, k))
    rhs = np.zeros(0)
    owner: list[int] = []
    cuts: list[tuple[int, float]] = []
    history = [(sol.metric_value, sol.ssr)]
    converged = False
    it = 0
    report = None
    while True:
        model = LinearModel(spec, active, coef)
        report = certify(model, constraints, tol_sip)
        if report.all_satisfied:
            converged = True
            break
        if it >= max_iter or len(cuts) >= max_cuts:
            break
        it += 1
        for ci, chk in enumerate(report.checks):
            if chk.satisfied or len(cuts) >= max_cuts:
                continue
            a, b = constraints[ci].cut(spec, chk.argmax)
            rows = np.vstack([rows, a])
            rhs = np.append(rhs, b)
            owner.append(ci)
            cuts.append((ci, float(chk.argmax[0])))
        if lb_ssr is None:
            lb_ssr = _engine.all_subset_ssr(np.ascontiguousarray(A / norms), z)
        best = _constrained_search(A, z, metric, sig, rows, rhs, lb_ssr)
        if best is None:
            pair = _infeasible_pair(A, rows, rhs, np.array(owner), len(constraints))
            if pair is None:
                raise InfeasibleError("no subset satisfies the accumulated cuts")
            a, b = (constraints[i].describe() for i in pair)
            raise InfeasibleError(f"constraints {a} and {b} cannot hold together")
        _, _, active, coef, ssr = best
        history.append((float(_engine.metric_formula(metric.code, ssr, n, len(active), k, sig)),
                        ssr))

    flags = list(sflags)
    if not converged:
        flags.append("sip_unconverged")
    if active:
        r = z - A[:, list(active)] @ coef
        ssr = float(r @ r)
    else:
        ssr = float(z @ z)
    try:
        value = metric_value(metric, ssr, n, len(active), k, sig)
    except ContractViolation:
        value = math.inf
        flags.append("metric_undefined")
    return ConstrainedSolution(
        active=tuple(active), coefficients=np.asarray(coef, dtype=float), ssr=ssr,
        metric_value=value, cardinality=len(active), metric=metric,
        proof="constrained-enumeration", nodes=0, sigma_sq=sig, big_m=sol.big_m,
        flags=tuple(flags), notes=(), spec=spec, converged=converged, iterations=it,
        cuts=tuple(cuts), report=report, history=tuple(history))
