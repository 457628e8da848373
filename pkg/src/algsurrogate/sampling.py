"""Space-filling designs, error-maximization sampling and the adaptive fit loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .basis import BasisSpec, LinearModel, expand, predict
from .dataset import Dataset, Domain
from .errors import ContractViolation
from .regress import FitnessMetric, ols_fit
from .subset import best_subset_metric

log = logging.getLogger(__name__)


class BlackBoxSystem:
    """A response function over a box domain that counts its evaluations."""

    def __init__(self, fn: Callable[[np.ndarray], float], domain: Domain, name: str = "system"):
        self._fn = fn
        self.domain = domain
        self.name = name
        self.eval_count = 0

    def eval(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self.eval_count += 1
        return float(self._fn(x))

    __call__ = eval

    def eval_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.domain.dim)
        return np.array([self.eval(p) for p in pts])


def lhs_design(n: int, domain: Domain, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Latin hypercube: one point in each of ``n`` equal-width bins per dimension.

    Returns an ``(n, d)`` array.
    """
    if n < 1:
        raise ContractViolation("lhs_design needs n >= 1")
    rng = np.random.default_rng(seed)
    d = domain.dim
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return domain.lower + u * domain.width


@dataclass
class EmsConfig:
    """Settings for :func:`ems_loop`.

    ``delta`` is the target relative error; the loop stops when the largest
    squared relative error found by the search is at most ``delta**2``.
    """

    delta: float = 1e-4
    initial_points: int = 1
    batch_size: int = 5
    dfo_budget: int = 100
    max_total_points: int = 100
    seed: int = 0
    eps_den: float = 1e-6
    response_scale: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ContractViolation("delta must be positive")
        for name in ("initial_points", "batch_size", "max_total_points"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be >= 1")
        if self.dfo_budget < 4:
            raise ContractViolation("dfo_budget must be >= 4")
        if not self.eps_den > 0 or not self.response_scale > 0:
            raise ContractViolation("eps_den and response_scale must be positive")

    @property
    def threshold(self) -> float:
        return self.delta ** 2

    @property
    def denominator_floor(self) -> float:
        return self.eps_den * self.response_scale


def relative_error_sq(z: float, zhat: float, floor: float) -> float:
    """((z - zhat) / g)^2 with g = z, or sign(z)*floor when |z| <= floor."""
    if abs(z) > floor:
        g = z
    else:
        g = floor if z >= 0 else -floor
    return ((z - zhat) / g) ** 2


def ems_objective(model: LinearModel, system: BlackBoxSystem, x, *, eps_den: float = 1e-6,
                  response_scale: float = 1.0) -> float:
    """Squared relative model error at ``x``; costs one system evaluation."""
    zhat = float(predict(model, np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))[0])
    return relative_error_sq(system.eval(x), zhat, eps_den * response_scale)


def dfo_maximize(objective: Callable[[np.ndarray], float], domain: Domain, budget: int,
                 seed: int | np.random.Generator = 0, n_starts: int = 3
                 ) -> list[tuple[np.ndarray, float]]:
    """Derivative-free maximization by LHS exploration plus pattern search.

    Half of the budget (rounded up) goes to a Latin hypercube; the rest runs
    an opportunistic coordinate pattern search from the best ``n_starts``
    exploration points.  Steps start at a quarter of the domain width and are
    halved after an unsuccessful poll, down to 1e-4 of the width.

    Returns every evaluated (point, value), best first; ties are ordered by
    point coordinates.
    """
    if budget < 4:
        raise ContractViolation("dfo_budget must be >= 4")
    rng = np.random.default_rng(seed)
    seen: dict[tuple, float] = {}
    order: list[tuple] = []

    def f(x) -> float:
        key = tuple(float(v) for v in x)
        if key not in seen:
            seen[key] = float(objective(np.array(key)))
            order.append(key)
        return seen[key]

    n_explore = math.ceil(budget / 2)
    for x in lhs_design(n_explore, domain, rng):
        f(x)
    ranked = sorted(order, key=lambda key: (-seen[key], key))
    starts = ranked[:max(1, n_starts)]
    width = domain.width
    remaining = budget - len(seen)
    for s_idx, start in enumerate(starts):
        share = remaining // (len(starts) - s_idx)
        if share <= 0:
            continue
        limit = len(seen) + share
        x = np.array(start)
        fx = seen[start]
        step = 0.25
        while step >= 1e-4 and len(seen) < limit:
            moved = False
            for j in range(domain.dim):
                for sign in (1.0, -1.0):
                    cand = x.copy()
                    cand[j] = np.clip(x[j] + sign * step * width[j], domain.lower[j], domain.upper[j])
                    if cand[j] == x[j]:
                        continue
                    if tuple(cand) not in seen and len(seen) >= limit:
                        break
                    fc = f(cand)
                    if fc > fx:
                        x, fx, moved = cand, fc, True
                        break
                if moved:
                    break
            if not moved:
                step /= 2
        remaining = budget - len(seen)
    ranked = sorted(order, key=lambda key: (-seen[key], key))
    return [(np.array(k), seen[k]) for k in ranked]


@dataclass
class EmsIteration:
    iteration: int
    n_train: int
    max_rel_err: float
    metric_value: float
    evaluations: int
    model: LinearModel


@dataclass
class EmsTrace:
    records: list[EmsIteration] = field(default_factory=list)
    converged: bool = False
    initial_evaluations: int = 0
    training: Dataset | None = None

    @property
    def final_size(self) -> int:
        return self.records[-1].n_train if self.records else 0

    @property
    def total_evaluations(self) -> int:
        return self.initial_evaluations + sum(r.evaluations for r in self.records)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "n_train", "max_rel_err", "metric_value"])
            for r in self.records:
                w.writerow([r.iteration, r.n_train, repr(float(r.max_rel_err)),
                            repr(float(r.metric_value))])


def fit_model(data: Dataset, spec: BasisSpec, metric) -> tuple[LinearModel, float]:
    """Metric-optimal model for ``data``; a constant fit while N < 2."""
    z = data.responses
    if data.n < 2:
        try:
            model = LinearModel.constant(spec, float(z.mean()), response_name=data.response_name,
                                         input_names=data.input_names)
        except ContractViolation:
            fit = ols_fit(expand(data, spec), z, [0])
            model = LinearModel(spec, (0,), fit.coefficients, data.response_name,
                                data.input_names)
        return model, math.nan
    sol = best_subset_metric(expand(data, spec), z, metric, "direct")
    model = LinearModel(spec, sol.active, sol.coefficients, data.response_name, data.input_names)
    return model, sol.metric_value


def ems_loop(system: BlackBoxSystem, spec: BasisSpec, metric="BIC",
             config: EmsConfig | None = None) -> tuple[LinearModel, EmsTrace]:
    """Adaptive model building: fit, search for the worst relative error, add points.

    The loop ends when the error search finds nothing above the tolerance
    (``trace.converged``) or when ``max_total_points`` is reached.
    """
    config = config or EmsConfig()
    metric = FitnessMetric.parse(metric)
    rng = np.random.default_rng(config.seed)
    dom = system.domain
    start_count = system.eval_count

    if config.initial_points > 1:
        x0 = lhs_design(config.initial_points, dom, rng)
    else:
        x0 = (dom.lower + rng.random(dom.dim) * dom.width).reshape(1, -1)
    data = Dataset(x0, system.eval_many(x0))
    trace = EmsTrace(initial_evaluations=system.eval_count - start_count)
    floor = config.denominator_floor
    it = 0
    while True:
        it += 1
        model, mval = fit_model(data, spec, metric)
        cache: dict[tuple, float] = {}
        before = system.eval_count

        def objective(x, model=model, cache=cache):
            zx = system.eval(x)
            cache[tuple(float(v) for v in x)] = zx
            zhat = float(predict(model, x.reshape(1, -1))[0])
            return relative_error_sq(zx, zhat, floor)

        found = dfo_maximize(objective, dom, config.dfo_budget, rng)
        worst = found[0][1]
        trace.records.append(EmsIteration(it, data.n, math.sqrt(worst), mval,
                                          system.eval_count - before, model))
        if worst <= config.threshold:
            trace.converged = True
            break
        room = config.max_total_points - data.n
        if room <= 0:
            break
        existing = {tuple(float(v) for v in row) for row in data.inputs}
        new = [x for x, v in found if v > config.threshold and tuple(x) not in existing]
        new = new[:min(config.batch_size, room)]
        if not new:
            break
        pts = np.array(new)
        data = data.append(pts, [cache[tuple(p)] for p in new])
        log.debug("iteration %d: max rel err %.3g, n -> %d", it, math.sqrt(worst), data.n)
    trace.training = data
    return model, trace

