"""Benchmark experiments over the reaction-kinetics problem set.

Two arms are provided:

* ``ems-vs-lhs``: adaptive sampling against Latin hypercube designs of the
  same size and of fixed sizes 20, 30, 40 and 50.
* ``constrained``: unconstrained (UC), bound-constrained on the training
  domain (CR) and on an extended domain (ECR) fits from 25 LHS points,
  validated on three segments of the extended domain.

Each problem gets its own seed, ``seed ^ index``; sub-streams are derived
from ``(problem_seed, stream_id)`` so the results do not depend on run order.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .basis import BasisSpec, expand, standard_basis_13
from .conreg import bound_constraints, sip_fit
from .dataset import Dataset, Domain
from .evaluation import (EXTENDED_SEGMENTS, error_factor, evaluate, performance_profile,
                         segment_points, summarize, validation_points, write_profile_csv,
                         write_summary_csv)
from .kinetics import ReactionProblem, as_black_box, generate_benchmark, write_problems_csv
from .regress import FitnessMetric
from .sampling import EmsConfig, ems_loop, fit_model, lhs_design
from .subset import best_subset_metric

log = logging.getLogger(__name__)

EMS_METHODS = ("EMS", "LHS", "LHS-20", "LHS-30", "LHS-40", "LHS-50")
CONSTRAINED_METHODS = ("UC", "CR", "ECR")
ARMS = ("ems-vs-lhs", "constrained")
EXTENDED_DOMAIN = (0.4, 14.0)
CONSTRAINED_TRAIN_POINTS = 25
LOWER_BOUND, UPPER_BOUND = 0.0, 1.0
FAILURE_LIMIT = 0.10

# sub-stream ids
_EMS, _LHS, _VAL = 0, 1, 2


def problem_seed(seed: int, index: int) -> int:
    return int(seed) ^ int(index)


def _stream(ps: int, sid: int, extra: int = 0) -> int:
    """Independent 64-bit seed for one sub-stream of a problem."""
    return int(np.random.SeedSequence([ps, sid, extra]).generate_state(1, np.uint64)[0])


def _dataset(problem: ReactionProblem, x: np.ndarray) -> Dataset:
    return Dataset(x, problem.concentration(x[:, 0]), ("t",), problem.species)


@dataclass
class ProblemResult:
    problem: ReactionProblem
    rmse: dict[str, dict[str, float]] = field(default_factory=dict)  # segment -> method -> rmse
    r2: dict[str, dict[str, float]] = field(default_factory=dict)
    n_ems: int = 0
    converged: bool = False
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def run_ems_problem(problem: ReactionProblem, seed: int, spec: BasisSpec, metric,
                    delta: float, ems: dict | None = None) -> ProblemResult:
    """EMS, LHS of the EMS size and LHS-20/30/40/50 on one problem."""
    ps = problem_seed(seed, problem.index)
    dom = problem.time_domain
    res = ProblemResult(problem)
    cfg = EmsConfig(delta=delta, seed=_stream(ps, _EMS), **(ems or {}))
    system = as_black_box(problem)
    model, trace = ems_loop(system, spec, metric, cfg)
    res.n_ems, res.converged = trace.final_size, trace.converged
    train_mean = {"EMS": float(trace.training.responses.mean())}
    models = {"EMS": model}
    sizes = {"LHS": res.n_ems, "LHS-20": 20, "LHS-30": 30, "LHS-40": 40, "LHS-50": 50}
    for j, (name, n) in enumerate(sizes.items()):
        data = _dataset(problem, lhs_design(n, dom, _stream(ps, _LHS, j)))
        models[name], _ = fit_model(data, spec, metric)
        train_mean[name] = float(data.responses.mean())
    val = _dataset(problem, validation_points(dom, 1000, _stream(ps, _VAL)))
    res.rmse["training"], res.r2["training"] = {}, {}
    for name in EMS_METHODS:
        rep = evaluate(models[name], val, train_mean[name])
        res.rmse["training"][name] = rep.rmse_val
        res.r2["training"][name] = rep.r2_val
    return res


def run_constrained_problem(problem: ReactionProblem, seed: int, spec: BasisSpec,
                            metric) -> ProblemResult:
    """UC, CR and ECR fits from 25 LHS points, scored on the three segments."""
    ps = problem_seed(seed, problem.index)
    res = ProblemResult(problem)
    data = _dataset(problem, lhs_design(CONSTRAINED_TRAIN_POINTS, problem.time_domain,
                                        _stream(ps, _LHS)))
    X = expand(data, spec)
    z = data.responses
    uc = best_subset_metric(X, z, metric, "direct").model(spec)
    dom = problem.time_domain
    cr = sip_fit(X, z, metric, bound_constraints(LOWER_BOUND, UPPER_BOUND, dom))
    ecr = sip_fit(X, z, metric, bound_constraints(LOWER_BOUND, UPPER_BOUND,
                                                  Domain.interval(*EXTENDED_DOMAIN)))
    models = {"UC": uc, "CR": cr.model(spec), "ECR": ecr.model(spec)}
    zbar = float(z.mean())
    for s, (name, _, _) in enumerate(EXTENDED_SEGMENTS):
        val = _dataset(problem, segment_points(name, 1000, _stream(ps, _VAL, s)))
        res.rmse[name], res.r2[name] = {}, {}
        for m in CONSTRAINED_METHODS:
            rep = evaluate(models[m], val, zbar)
            res.rmse[name][m] = rep.rmse_val
            res.r2[name][m] = rep.r2_val
    res.converged = cr.converged and ecr.converged
    return res


@dataclass
class BenchmarkOutcome:
    arm: str
    results: list[ProblemResult]
    files: list[Path]

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.results)

    @property
    def ok(self) -> bool:
        return self.failures <= FAILURE_LIMIT * max(len(self.results), 1)


def _fmt(v: float) -> str:
    return repr(float(v))


def run_benchmark(arm: str, seed: int, out_dir, *, systems: int = 25, metric="BIC",
                  delta: float = 1e-4, spec: BasisSpec | None = None,
                  ems: dict | None = None, problems: Sequence[ReactionProblem] | None = None
                  ) -> BenchmarkOutcome:
    """Run one arm over the benchmark and write its CSV reports to ``out_dir``.

    Per-problem failures are recorded in ``failures.csv`` and skipped.
    """
    if arm not in ARMS:
        raise ValueError(f"arm must be one of {ARMS}")
    metric = FitnessMetric.parse(metric)
    spec = spec or standard_basis_13()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if problems is None:
        problems = generate_benchmark(seed, systems)
    results = []
    for p in problems:
        try:
            if arm == "ems-vs-lhs":
                r = run_ems_problem(p, seed, spec, metric, delta, ems)
            else:
                r = run_constrained_problem(p, seed, spec, metric)
        except Exception as exc:  # recorded, not fatal
            log.warning("problem %d (%s) failed: %s", p.index, p.name, exc)
            r = ProblemResult(p, error=f"{type(exc).__name__}: {exc}")
        results.append(r)

    files = [out / "problems.csv"]
    write_problems_csv(problems, files[0])
    methods = EMS_METHODS if arm == "ems-vs-lhs" else CONSTRAINED_METHODS
    segments = ("training",) if arm == "ems-vs-lhs" else tuple(s for s, _, _ in EXTENDED_SEGMENTS)
    ok = [r for r in results if not r.failed]
    summary = []
    for seg in segments:
        suffix = "" if arm == "ems-vs-lhs" else f"_{seg}"
        ef_rows = [error_factor(r.rmse[seg]) for r in ok]
        for name, table in (("ef", ef_rows), ("rmse", [r.rmse[seg] for r in ok]),
                            ("r2", [r.r2[seg] for r in ok])):
            path = out / f"{name}_table{suffix}.csv"
            _write_table(path, ok, methods, table)
            files.append(path)
        if ef_rows:
            path = out / f"profile{suffix}.csv"
            write_profile_csv(performance_profile(ef_rows), path)
            files.append(path)
        for m in methods:
            summary.append(summarize(f"r2_val{suffix}:{m}", [r.r2[seg][m] for r in ok]))
            summary.append(summarize(f"rmse_val{suffix}:{m}", [r.rmse[seg][m] for r in ok]))
    if arm == "ems-vs-lhs":
        summary.insert(0, summarize("n_train:EMS", [r.n_ems for r in ok]))
        path = out / "ems_sizes.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "problem", "n_train", "converged"])
            for r in ok:
                w.writerow([r.problem.index, r.problem.name, r.n_ems, int(r.converged)])
        files.append(path)
    path = out / "summary.csv"
    write_summary_csv(summary, path)
    files.append(path)
    path = out / "failures.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "problem", "error"])
        for r in results:
            if r.failed:
                w.writerow([r.problem.index, r.problem.name, r.error])
    files.append(path)
    return BenchmarkOutcome(arm, results, files)


def _write_table(path: Path, results, methods, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "problem", *methods])
        for r, row in zip(results, rows):
            w.writerow([r.problem.index, r.problem.name, *(_fmt(row[m]) for m in methods)])
