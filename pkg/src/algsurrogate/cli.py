"""Command-line interface: fit, sample, certify and benchmark.

Settings come from an optional config file (``key = value`` lines under
``[section]`` headers) and are overridden by command-line flags.  Example::

    [run]
    seed = 7
    metric = BIC
    basis = standard
    data = train.csv

    [ems]
    delta = 1e-4
    batch_size = 5

    [problem]
    scheme = series
    k_a = 0.42
    k_b = 0.97
    species = A

    [constraints]
    lower, 0, 0.6, 10
    upper, 1, 0.6, 10

Keys are looked up by name in any section, so the grouping is for the
reader.  ``[constraints]`` holds bare ``kind, level, chi_lo, chi_hi`` lines.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .basis import (BasisSpec, LinearModel, expand, read_model, rich_basis, standard_basis_13,
                    write_model)
from .benchmark import ARMS, run_benchmark
from .conreg import ResponseConstraint, certify
from .dataset import read_csv
from .errors import SurrogateError
from .kinetics import ReactionProblem, as_black_box, generate_benchmark
from .regress import FitnessMetric
from .sampling import EmsConfig, ems_loop
from .subset import best_subset_metric

log = logging.getLogger(__name__)

EMS_KEYS = {"initial_points": int, "batch_size": int, "dfo_budget": int,
            "max_total_points": int, "eps_den": float, "response_scale": float}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Settings for one command after merging the config file and flags."""

    values: dict[str, str] = field(default_factory=dict)
    constraints: list[ResponseConstraint] = field(default_factory=list)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if self.values.get(key) in (None, ""):
            raise UsageError(f"missing required setting {key!r} (flag --{key.replace('_', '-')} "
                             f"or config key)")
        return self.values[key]

    @property
    def seed(self) -> int:
        try:
            return int(self.require("seed"))
        except ValueError as exc:
            raise UsageError("seed must be an integer") from exc

    @property
    def metric(self) -> FitnessMetric:
        return FitnessMetric.parse(self.get("metric", "BIC"))

    @property
    def out_dir(self) -> Path:
        path = Path(self.get("out_dir", "."))
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def basis(self) -> BasisSpec:
        return parse_basis(self.get("basis", "standard"))

    def ems_settings(self) -> dict:
        out = {}
        for key, cast in EMS_KEYS.items():
            if self.get(key) is not None:
                out[key] = cast(self.get(key))
        return out


def parse_basis(text: str) -> BasisSpec:
    """``standard`` (13 terms), ``rich`` (23 terms) or explicit tokens."""
    t = text.strip()
    if t == "standard":
        return standard_basis_13()
    if t == "rich":
        return rich_basis()
    return BasisSpec.parse(t)


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser(allow_no_value=True, delimiters=("=",),
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read(path)
    for section in parser.sections():
        for key, val in parser.items(section):
            if section == "constraints":
                # bare lines come back as keys with an empty or missing value
                cfg.constraints.append(ResponseConstraint.parse(key if not val else
                                                                f"{key}={val}"))
            else:
                cfg.values[key.strip().lower().replace("-", "_")] = (val or "").strip()
    return cfg


def merge(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    for key, val in vars(args).items():
        if key in ("command", "config", "constraint") or val is None:
            continue
        cfg.values[key] = str(val)
    for line in getattr(args, "constraint", None) or []:
        cfg.constraints.append(ResponseConstraint.parse(line))
    for key in ("data", "model"):
        if cfg.get(key) and not Path(cfg.get(key)).is_file():
            raise UsageError(f"{key} file not found: {cfg.get(key)}")
    return cfg


def cmd_fit(cfg: RunConfig) -> int:
    data = read_csv(cfg.require("data"))
    spec = cfg.basis
    X = expand(data, spec)
    sol = best_subset_metric(X, data.responses, cfg.metric, "direct")
    model = sol.model(spec, response_name=data.response_name, input_names=data.input_names)
    out = cfg.out_dir
    write_model(model, out / "model.txt")
    resid = data.responses - model.predict(data.inputs)
    dev = data.responses - data.responses.mean()
    sst = float(dev @ dev)
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else float("nan")
    with (out / "report.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "metric_value", "ssr", "p", "r2_train", "flags"])
        w.writerow([sol.metric.value, repr(sol.metric_value), repr(sol.ssr), sol.cardinality,
                    repr(r2), ";".join(sol.flags)])
    print(model.expression())
    return 0


def _problem(cfg: RunConfig) -> ReactionProblem:
    if cfg.get("problem") is not None:
        idx = int(cfg.get("problem"))
        problems = generate_benchmark(cfg.seed)
        if not 0 <= idx < len(problems):
            raise UsageError(f"problem index must be in [0, {len(problems)})")
        return problems[idx]
    return ReactionProblem(cfg.require("scheme"), float(cfg.require("k_a")),
                           float(cfg.require("k_b")), cfg.require("species").upper())


def cmd_sample(cfg: RunConfig) -> int:
    seed = cfg.seed
    problem = _problem(cfg)
    config = EmsConfig(delta=float(cfg.get("delta", 1e-4)), seed=seed, **cfg.ems_settings())
    model, trace = ems_loop(as_black_box(problem), cfg.basis, cfg.metric, config)
    out = cfg.out_dir
    model = LinearModel(model.spec, model.active, model.coefficients, problem.species, ("t",))
    write_model(model, out / "model.txt")
    trace.write_csv(out / "trace.csv")
    with (out / "status.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["problem", "converged", "n_train", "evaluations"])
        w.writerow([problem.name, int(trace.converged), trace.final_size,
                    trace.total_evaluations])
    print(f"{problem.name}: {'converged' if trace.converged else 'NOT converged'} "
          f"with {trace.final_size} points")
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    model = read_model(cfg.require("model"))
    if not cfg.constraints:
        raise UsageError("no constraints given (--constraint or [constraints] section)")
    tol = float(cfg.get("tol", 1e-6))
    report = certify(model, cfg.constraints, tol)
    report.write_csv(cfg.out_dir / "certification.csv")
    for chk in report.checks:
        if not chk.satisfied:
            print(f"violated: {chk.constraint.describe()} at x = {float(chk.argmax[0])!r} "
                  f"(violation {chk.violation:.6g})")
    return 0 if report.all_satisfied else 1


def cmd_benchmark(cfg: RunConfig) -> int:
    arm = cfg.require("arm")
    if arm not in ARMS:
        raise UsageError(f"--arm must be one of {ARMS}")
    outcome = run_benchmark(arm, cfg.seed, cfg.out_dir, systems=int(cfg.get("systems", 25)),
                            metric=cfg.metric, delta=float(cfg.get("delta", 1e-4)),
                            spec=cfg.basis, ems=cfg.ems_settings())
    n = len(outcome.results)
    print(f"{arm}: {n - outcome.failures}/{n} problems completed")
    return 0 if outcome.ok else 1


COMMANDS = {"fit": cmd_fit, "sample": cmd_sample, "certify": cmd_certify,
            "benchmark": cmd_benchmark}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="algsurrogate",
                                 description="Sparse algebraic surrogate models.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--metric", choices=[m.value for m in FitnessMetric],
                       type=lambda s: FitnessMetric.parse(s).value)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--basis", help="standard, rich, or tokens like 'pow:1 log const'")
        if name == "fit":
            p.add_argument("--data")
        if name in ("sample", "benchmark"):
            p.add_argument("--delta", type=float)
        if name == "sample":
            p.add_argument("--problem", type=int, help="index into the generated benchmark")
        if name == "certify":
            p.add_argument("--model")
            p.add_argument("--constraint", action="append",
                           help="'kind, level, chi_lo, chi_hi' (repeatable)")
            p.add_argument("--tol", type=float)
        if name == "benchmark":
            p.add_argument("--arm", choices=ARMS)
            p.add_argument("--systems", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = merge(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except (UsageError, SurrogateError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
