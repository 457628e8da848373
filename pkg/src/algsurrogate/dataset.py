"""Training/validation data containers and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractViolation, EmptyDatasetError, ParseError


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractViolation("domain bounds must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ContractViolation("domain bounds must be finite")
        if np.any(lo >= hi):
            raise ContractViolation(f"domain requires lower < upper, got {lo} / {hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Domain":
        return cls(np.array([lo]), np.array([hi]))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class Dataset:
    """N input points (d columns) with a single response vector.

    Parameters
    ----------
    inputs : ndarray, shape (N, d)
    responses : ndarray, shape (N,)
    input_names : tuple of str
        One name per input column.
    response_name : str
    """

    inputs: np.ndarray
    responses: np.ndarray
    input_names: tuple[str, ...] = ()
    response_name: str = "z"

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        z = np.asarray(self.responses, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise EmptyDatasetError("dataset needs at least one row and one input column")
        if z.shape[0] != x.shape[0]:
            raise ContractViolation(
                f"responses length {z.shape[0]} != input rows {x.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ContractViolation("dataset contains non-finite values")
        names = tuple(self.input_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise ContractViolation("need one name per input column")
        x = x.copy()
        z = z.copy()
        x.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "responses", z)
        object.__setattr__(self, "input_names", names)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def append(self, inputs, responses) -> "Dataset":
        """Return a new dataset with extra rows."""
        x = np.asarray(inputs, dtype=float).reshape(-1, self.d)
        z = np.asarray(responses, dtype=float).reshape(-1)
        return Dataset(np.vstack([self.inputs, x]), np.concatenate([self.responses, z]),
                       self.input_names, self.response_name)


def read_csv(path: str | Path) -> Dataset:
    """Read a header + numeric body CSV; the last column is the response."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyDatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or any(not h for h in header):
        raise ParseError("header must name at least two columns", line=1)
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", line=lineno) from None
        if not all(np.isfinite(vals)):
            raise ParseError("non-finite value", line=lineno)
        body.append(vals)
    if not body:
        raise EmptyDatasetError(f"{path}: no data rows")
    arr = np.array(body)
    return Dataset(arr[:, :-1], arr[:, -1], tuple(header[:-1]), header[-1])


def write_csv(dataset: Dataset, path: str | Path) -> None:
    # repr() of a float is the shortest string that round-trips exactly
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(list(dataset.input_names) + [dataset.response_name]) + "\n")
        for xi, zi in zip(dataset.inputs, dataset.responses):
            fh.write(",".join(repr(float(v)) for v in (*xi, zi)) + "\n")


def from_columns(columns: Sequence[Sequence[float]], names: Sequence[str]) -> Dataset:
    """Build a dataset from column lists; the last column is the response."""
    arr = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    return Dataset(arr[:, :-1], arr[:, -1], tuple(names[:-1]), names[-1])
