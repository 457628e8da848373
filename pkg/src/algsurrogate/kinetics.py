"""Synthetic batch-reactor benchmark: closed-form concentration profiles.

Two first-order schemes, both starting from [A]0 = 1, [B]0 = [C]0 = 0:

* series    A -k1-> B -k2-> C
* parallel  A -ka-> B,  A -kb-> C
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Domain
from .errors import ContractViolation, DegenerateRatesError
from .sampling import BlackBoxSystem

SPECIES = ("A", "B", "C")
SCHEMES = ("series", "parallel")
KA_RANGE = (0.4, 3.0)
KB_RANGE = (0.9, 2.1)
TIME_DOMAIN = (0.6, 10.0)
RATE_GAP = 1e-9


def _check_species(species: str) -> str:
    s = species.upper()
    if s not in SPECIES:
        raise ContractViolation(f"species must be one of {SPECIES}, got {species!r}")
    return s


def series_concentration(k1: float, k2: float, species: str, t):
    """Closed-form concentration for A -> B -> C at time(s) ``t``."""
    s = _check_species(species)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ContractViolation("time must be >= 0")
    if abs(k2 - k1) <= RATE_GAP:
        raise DegenerateRatesError(f"series closed form needs k1 != k2 (got {k1}, {k2})")
    a = np.exp(-k1 * t)
    if s == "A":
        return a
    b = k1 / (k2 - k1) * (a - np.exp(-k2 * t))
    if s == "B":
        return b
    return 1.0 - a - b


def parallel_concentration(ka: float, kb: float, species: str, t):
    """Closed-form concentration for competing A -> B and A -> C."""
    s = _check_species(species)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ContractViolation("time must be >= 0")
    ktot = ka + kb
    if ktot <= 0:
        raise ContractViolation("ka + kb must be positive")
    if s == "A":
        return np.exp(-ktot * t)
    spent = -np.expm1(-ktot * t)
    return (ka if s == "B" else kb) / ktot * spent


@dataclass(frozen=True)
class ReactionProblem:
    scheme: str
    k_a: float
    k_b: float
    species: str
    time_domain: Domain = field(default_factory=lambda: Domain.interval(*TIME_DOMAIN))
    index: int = 0
    system: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ContractViolation(f"scheme must be one of {SCHEMES}")
        _check_species(self.species)
        if not (KA_RANGE[0] <= self.k_a <= KA_RANGE[1] and KB_RANGE[0] <= self.k_b <= KB_RANGE[1]):
            raise ContractViolation(f"rates out of range: k_a={self.k_a}, k_b={self.k_b}")
        if abs(self.k_a - self.k_b) <= RATE_GAP:
            raise DegenerateRatesError("k_a and k_b must differ")

    @property
    def name(self) -> str:
        return f"{self.scheme}-{self.species}-s{self.system:02d}"

    def concentration(self, t):
        fn = series_concentration if self.scheme == "series" else parallel_concentration
        return fn(self.k_a, self.k_b, self.species, t)

    def with_domain(self, lo: float, hi: float) -> "ReactionProblem":
        return ReactionProblem(self.scheme, self.k_a, self.k_b, self.species,
                               Domain.interval(lo, hi), self.index, self.system)


def draw_rate_pairs(seed: int, n_each: int = 5) -> list[tuple[float, float]]:
    """``n_each`` uniform k_a and k_b draws, exhaustively paired (k_a-major)."""
    rng = np.random.default_rng(seed)
    ka = rng.uniform(*KA_RANGE, size=n_each)
    kb = rng.uniform(*KB_RANGE, size=n_each)
    for j in range(n_each):
        while np.any(np.abs(ka - kb[j]) <= RATE_GAP):
            kb[j] = rng.uniform(*KB_RANGE)
    return [(float(a), float(b)) for a in ka for b in kb]


def generate_benchmark(seed: int, n_systems: int = 25) -> list[ReactionProblem]:
    """The 150-problem set: 25 rate pairs x 2 schemes x 3 species.

    ``n_systems`` keeps only the first few rate pairs (desk-scale runs).
    """
    pairs = draw_rate_pairs(seed)[:n_systems]
    problems = []
    for s, (ka, kb) in enumerate(pairs):
        for scheme in SCHEMES:
            for species in SPECIES:
                problems.append(ReactionProblem(scheme, ka, kb, species,
                                                index=len(problems), system=s))
    return problems


def as_black_box(problem: ReactionProblem) -> BlackBoxSystem:
    def evaluate(x):
        return float(problem.concentration(float(np.asarray(x).reshape(-1)[0])))

    return BlackBoxSystem(evaluate, problem.time_domain, name=problem.name)


def write_problems_csv(problems, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "scheme", "k_a", "k_b", "species"])
        for p in problems:
            w.writerow([p.index, p.scheme, repr(p.k_a), repr(p.k_b), p.species])


def read_problems_csv(path) -> list[ReactionProblem]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [ReactionProblem(r["scheme"], float(r["k_a"]), float(r["k_b"]), r["species"],
                            index=int(r["index"]), system=int(r["index"]) // 6) for r in rows]
