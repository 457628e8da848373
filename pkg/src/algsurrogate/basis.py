"""Nonlinear feature transforms, design matrices and fitted linear models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import Dataset
from .errors import ContractViolation, DomainError, ParseError

KINDS = ("pow", "log", "exp", "const")
# Reserved for later: ratio, trig, sigmoid with fixed hyperparameter.
EXTENSION_KINDS = ("ratio", "sin", "cos", "sigmoid", "arrhenius", "gaussian")


@dataclass(frozen=True)
class BasisFunction:
    kind: str
    exponent: float = 0.0
    input_index: int = 0

    def __post_init__(self):
        if self.kind in EXTENSION_KINDS:
            raise NotImplementedError(f"basis kind {self.kind!r} is not implemented")
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown basis kind {self.kind!r}")
        if self.kind == "pow":
            if not np.isfinite(self.exponent) or self.exponent == 0:
                raise ContractViolation("power exponent must be finite and nonzero")
        elif self.exponent != 0.0:
            object.__setattr__(self, "exponent", 0.0)
        if self.input_index < 0:
            raise ContractViolation("input_index must be >= 0")

    @property
    def needs_positive(self) -> bool:
        if self.kind == "log":
            return True
        if self.kind == "pow":
            e = self.exponent
            return e < 0 or e != int(e)
        return False

    def _check(self, x: np.ndarray) -> None:
        if self.needs_positive:
            bad = np.flatnonzero(~(x > 0))
            if bad.size:
                raise DomainError(
                    f"{self.label()} requires positive input; row {int(bad[0])} has "
                    f"{x[bad[0]]!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a 1-D array of values of the selected input."""
        x = np.asarray(x, dtype=float)
        self._check(x)
        if self.kind == "pow":
            e = self.exponent
            out = x ** int(e) if e == int(e) else x ** e
        elif self.kind == "log":
            out = np.log(x)
        elif self.kind == "exp":
            with np.errstate(over="ignore"):
                out = np.exp(x)
        else:
            out = np.ones_like(x)
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise DomainError(f"{self.label()} is not finite at row {bad} (x={x[bad]!r})")
        return out

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """d/dx of the function with respect to its own input."""
        x = np.asarray(x, dtype=float)
        self._check(x)
        if self.kind == "pow":
            e = self.exponent
            if e == 1:
                return np.ones_like(x)
            return e * (x ** int(e - 1) if e == int(e) else x ** (e - 1))
        if self.kind == "log":
            return 1.0 / x
        if self.kind == "exp":
            return np.exp(x)
        return np.zeros_like(x)

    def token(self) -> str:
        """Config-file token, e.g. ``pow:-2``, ``log``, ``exp@1``."""
        if self.kind == "pow":
            e = self.exponent
            s = f"pow:{int(e)}" if e == int(e) else f"pow:{e!r}"
        else:
            s = self.kind
        return s if self.input_index == 0 else f"{s}@{self.input_index}"

    def label(self, names: Sequence[str] | None = None) -> str:
        var = names[self.input_index] if names else ("t" if self.input_index == 0
                                                     else f"x{self.input_index + 1}")
        if self.kind == "pow":
            e = self.exponent
            return var if e == 1 else f"{var}^{int(e) if e == int(e) else e}"
        if self.kind == "log":
            return f"log({var})"
        if self.kind == "exp":
            return f"exp({var})"
        return "1"

    @classmethod
    def parse(cls, token: str) -> "BasisFunction":
        tok = token.strip()
        idx = 0
        if "@" in tok:
            tok, _, i = tok.partition("@")
            try:
                idx = int(i)
            except ValueError:
                raise ParseError(f"bad input index in basis token {token!r}") from None
        kind, _, arg = tok.partition(":")
        kind = kind.strip().lower()
        if kind == "pow":
            try:
                return cls("pow", float(arg), idx)
            except ValueError:
                raise ParseError(f"bad exponent in basis token {token!r}") from None
        if kind in ("log", "exp", "const") and not arg:
            return cls(kind, 0.0, idx)
        raise ParseError(f"unknown basis token {token!r}")


@dataclass(frozen=True)
class BasisSpec:
    functions: tuple[BasisFunction, ...]

    def __post_init__(self):
        funcs = tuple(self.functions)
        if not funcs:
            raise ContractViolation("basis spec needs at least one function")
        seen = set()
        for f in funcs:
            key = (f.kind, f.exponent, f.input_index)
            if key in seen:
                raise ContractViolation(f"duplicate basis function {f.token()}")
            seen.add(key)
        object.__setattr__(self, "functions", funcs)

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, j) -> BasisFunction:
        return self.functions[j]

    @property
    def k(self) -> int:
        return len(self.functions)

    @property
    def max_input_index(self) -> int:
        return max(f.input_index for f in self.functions)

    def tokens(self) -> list[str]:
        return [f.token() for f in self.functions]

    def labels(self, names: Sequence[str] | None = None) -> list[str]:
        return [f.label(names) for f in self.functions]

    @classmethod
    def parse(cls, tokens: Iterable[str] | str) -> "BasisSpec":
        if isinstance(tokens, str):
            tokens = tokens.replace(",", " ").split()
        return cls(tuple(BasisFunction.parse(t) for t in tokens))

    def evaluate(self, points) -> np.ndarray:
        """Evaluate every function at each row of ``points`` (shape (N, d) or (N,))."""
        x = _as_points(points)
        if self.max_input_index >= x.shape[1]:
            raise ContractViolation(
                f"basis references input {self.max_input_index} but points have "
                f"{x.shape[1]} columns")
        return np.column_stack([f(x[:, f.input_index]) for f in self.functions])

    def derivative(self, points, wrt: int = 0) -> np.ndarray:
        x = _as_points(points)
        cols = []
        for f in self.functions:
            if f.input_index == wrt:
                cols.append(f.derivative(x[:, wrt]))
            else:
                cols.append(np.zeros(x.shape[0]))
        return np.column_stack(cols)


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


def power_basis(exponents: Iterable[float], extras: Sequence[str] = ("log", "exp", "const"),
                input_index: int = 0) -> BasisSpec:
    funcs = [BasisFunction("pow", float(e), input_index) for e in exponents]
    funcs += [BasisFunction(kind, 0.0, input_index) for kind in extras]
    return BasisSpec(tuple(funcs))


def standard_basis_13() -> BasisSpec:
    """t^{+-0.5, +-1, +-2, +-3, +-4}, log t, exp t and a constant (k = 13)."""
    exps = []
    for e in (0.5, 1, 2, 3, 4):
        exps += [e, -e]
    return power_basis(exps)


def rich_basis() -> BasisSpec:
    """t^{+-0.5, +-1, ..., +-5} in half steps, log t, exp t and a constant (k = 23)."""
    exps = []
    for e in np.arange(1, 11) / 2:
        exps += [float(e), -float(e)]
    return power_basis(exps)


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    spec: BasisSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.spec.k:
            raise ContractViolation("design matrix shape does not match basis spec")
        if not np.all(np.isfinite(v)):
            raise DomainError("design matrix has non-finite entries")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def columns(self, active: Sequence[int]) -> np.ndarray:
        return self.values[:, list(active)]


def expand(dataset: Dataset | np.ndarray, spec: BasisSpec) -> DesignMatrix:
    """Evaluate ``spec`` row-wise on the dataset inputs."""
    x = dataset.inputs if isinstance(dataset, Dataset) else _as_points(dataset)
    return DesignMatrix(spec.evaluate(x), spec)


@dataclass(frozen=True)
class LinearModel:
    """Selected basis columns and their coefficients.

    ``active`` holds sorted, unique column indices into ``spec``.
    """

    spec: BasisSpec
    active: tuple[int, ...]
    coefficients: np.ndarray
    response_name: str = "z"
    input_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        act = tuple(int(a) for a in self.active)
        beta = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(set(act)) != len(act) or list(act) != sorted(act):
            raise ContractViolation("active indices must be unique and sorted")
        if any(a < 0 or a >= self.spec.k for a in act):
            raise ContractViolation("active index out of range")
        if beta.size != len(act):
            raise ContractViolation("one coefficient per active index required")
        beta = beta.copy()
        beta.flags.writeable = False
        object.__setattr__(self, "active", act)
        object.__setattr__(self, "coefficients", beta)

    @property
    def p(self) -> int:
        return len(self.active)

    @classmethod
    def constant(cls, spec: BasisSpec, value: float, **kw) -> "LinearModel":
        for j, f in enumerate(spec):
            if f.kind == "const":
                return cls(spec, (j,), np.array([value]), **kw)
        raise ContractViolation("basis spec has no constant term")

    def full_coefficients(self) -> np.ndarray:
        beta = np.zeros(self.spec.k)
        beta[list(self.active)] = self.coefficients
        return beta

    def predict(self, points) -> np.ndarray:
        return predict(self, points)

    def derivative(self, points, wrt: int = 0) -> np.ndarray:
        if not self.active:
            return np.zeros(_as_points(points).shape[0])
        sub = BasisSpec(tuple(self.spec[j] for j in self.active))
        return sub.derivative(points, wrt) @ self.coefficients

    def terms(self) -> list[tuple[str, float]]:
        return [(self.spec[j].token(), float(b)) for j, b in zip(self.active, self.coefficients)]

    def expression(self) -> str:
        names = self.input_names or None
        parts = [f"{b:+.6g}*{self.spec[j].label(names)}"
                 for j, b in zip(self.active, self.coefficients)]
        return f"{self.response_name} = " + (" ".join(parts) if parts else "0")


def predict(model: LinearModel, points) -> np.ndarray:
    """Evaluate the fitted model at one point or an array of points.

    Returns an array with one value per point.
    """
    x = _as_points(points)
    if not model.active:
        return np.zeros(x.shape[0])
    sub = BasisSpec(tuple(model.spec[j] for j in model.active))
    return sub.evaluate(x) @ model.coefficients


def write_model(model: LinearModel, path) -> None:
    """Plain-text model file: header comments then one ``token coefficient`` line per term."""
    lines = [f"# response: {model.response_name}",
             f"# basis: {' '.join(model.spec.tokens())}"]
    if model.input_names:
        lines.append(f"# inputs: {' '.join(model.input_names)}")
    lines += [f"{tok} {coef!r}" for tok, coef in model.terms()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_model(path) -> LinearModel:
    spec = None
    response = "z"
    inputs: tuple[str, ...] = ()
    terms = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                key = key.strip()
                if key == "basis":
                    spec = BasisSpec.parse(val)
                elif key == "response":
                    response = val.strip()
                elif key == "inputs":
                    inputs = tuple(val.split())
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected 'token coefficient'", line=lineno)
            try:
                terms.append((BasisFunction.parse(parts[0]), float(parts[1])))
            except ValueError:
                raise ParseError(f"bad coefficient {parts[1]!r}", line=lineno) from None
    if spec is None:
        spec = BasisSpec(tuple(f for f, _ in terms))
    lookup = {(f.kind, f.exponent, f.input_index): j for j, f in enumerate(spec)}
    pairs = []
    for f, b in terms:
        key = (f.kind, f.exponent, f.input_index)
        if key not in lookup:
            raise ParseError(f"term {f.token()} not in declared basis")
        pairs.append((lookup[key], b))
    pairs.sort()
    return LinearModel(spec, tuple(j for j, _ in pairs), np.array([b for _, b in pairs]),
                       response, inputs)
