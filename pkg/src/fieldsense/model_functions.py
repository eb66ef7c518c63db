"""Evaluable model/basis functions with derivative support.

Built-in kinds carry closed-form derivatives (inverse-distance up to second
order); expression trees fall back to nested central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularEvaluationError
from .multiindex import LowerSet, as_multiindex

_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)

#: Evaluating an inverse-distance kind closer than this to its source is an
#: error rather than an infinity.
SINGULARITY_RADIUS = 1e-12


def _central_difference(f, zeta, x):
    """Nested central differences, one axis at a time, step cbrt(eps)*scale."""
    j = next(i for i, z in enumerate(zeta) if z)
    reduced = zeta[:j] + (zeta[j] - 1,) + zeta[j + 1 :]
    h = _FD_STEP * max(1.0, abs(float(x[j])))
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[j] += h
    xm[j] -= h
    return (f.eval_derivative(reduced, xp) - f.eval_derivative(reduced, xm)) / (2.0 * h)


class ModelFunction:
    """Base class: evaluable over the domain, differentiable to requested order."""

    kind = "abstract"

    def eval(self, x) -> float:
        raise NotImplementedError

    def eval_derivative(self, zeta, x) -> float:
        zeta = as_multiindex(zeta)
        if sum(zeta) == 0:
            return self.eval(x)
        return _central_difference(self, zeta, np.asarray(x, dtype=float))

    def __call__(self, x) -> float:
        return self.eval(x)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Monomial(ModelFunction):
    exponents: tuple

    kind = "monomial"

    def __post_init__(self):
        object.__setattr__(self, "exponents", as_multiindex(self.exponents))

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.prod(x ** np.array(self.exponents)))

    def eval_derivative(self, zeta, x) -> float:
        zeta = as_multiindex(zeta)
        coef = 1.0
        rest = []
        for a, z in zip(self.exponents, zeta):
            if z > a:
                return 0.0
            coef *= math.perm(a, z)
            rest.append(a - z)
        x = np.asarray(x, dtype=float)
        return coef * float(np.prod(x ** np.array(rest)))

    def to_json(self):
        return {"kind": "monomial", "exponents": list(self.exponents)}


@dataclass(frozen=True)
class InverseDistance(ModelFunction):
    """f(x) = |x - source|^(-power), singular at the source."""

    source: tuple
    power: float = 1.0

    kind = "inverse_distance"

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(float(v) for v in self.source))
        object.__setattr__(self, "power", float(self.power))
        if self.power <= 0:
            raise ValueError(f"power must be positive, got {self.power}")

    def _offset(self, x):
        d = np.asarray(x, dtype=float) - np.array(self.source)
        r = float(np.linalg.norm(d))
        if r < SINGULARITY_RADIUS:
            raise SingularEvaluationError(
                f"evaluation within {SINGULARITY_RADIUS} of the source at {self.source}"
            )
        return d, r

    def eval(self, x) -> float:
        _, r = self._offset(x)
        return r ** (-self.power)

    def eval_derivative(self, zeta, x) -> float:
        zeta = as_multiindex(zeta)
        order = sum(zeta)
        if order == 0:
            return self.eval(x)
        d, r = self._offset(x)
        q = self.power
        if order == 1:
            j = zeta.index(1)
            return -q * d[j] * r ** (-q - 2.0)
        if order == 2:
            axes = [i for i, z in enumerate(zeta) for _ in range(z)]
            i, j = axes
            out = q * (q + 2.0) * d[i] * d[j] * r ** (-q - 4.0)
            if i == j:
                out -= q * r ** (-q - 2.0)
            return out
        return _central_difference(self, zeta, np.asarray(x, dtype=float))

    def to_json(self):
        return {"kind": "inverse_distance", "source": list(self.source), "power": self.power}


@dataclass(frozen=True)
class Constant(ModelFunction):
    """The unit background signal."""

    kind = "constant"

    def eval(self, x) -> float:
        return 1.0

    def eval_derivative(self, zeta, x) -> float:
        return 1.0 if sum(as_multiindex(zeta)) == 0 else 0.0

    def to_json(self):
        return {"kind": "constant"}


@dataclass(frozen=True)
class Sinusoid(ModelFunction):
    """sin or cos of (frequency . x + phase); derivatives shift the phase."""

    frequency: tuple
    phase: float = 0.0
    flavor: str = "sin"

    kind = "sinusoid"

    def __post_init__(self):
        object.__setattr__(self, "frequency", tuple(float(v) for v in self.frequency))
        object.__setattr__(self, "phase", float(self.phase))
        if self.flavor not in ("sin", "cos"):
            raise ValueError(f"flavor must be 'sin' or 'cos', got {self.flavor!r}")

    def eval_derivative(self, zeta, x) -> float:
        zeta = as_multiindex(zeta)
        k = np.array(self.frequency)
        factor = float(np.prod(k ** np.array(zeta)))
        shift = (math.pi / 2.0) * (sum(zeta) + (1 if self.flavor == "cos" else 0))
        u = float(k @ np.asarray(x, dtype=float)) + self.phase + shift
        return factor * math.sin(u)

    def eval(self, x) -> float:
        return self.eval_derivative((0,) * len(self.frequency), x)

    def to_json(self):
        return {
            "kind": "sinusoid",
            "frequency": list(self.frequency),
            "phase": self.phase,
            "flavor": self.flavor,
        }


@dataclass(frozen=True)
class Coordinate(ModelFunction):
    axis: int

    kind = "coordinate"

    def eval(self, x) -> float:
        return float(np.asarray(x, dtype=float)[self.axis])

    def eval_derivative(self, zeta, x) -> float:
        zeta = as_multiindex(zeta)
        order = sum(zeta)
        if order == 0:
            return self.eval(x)
        if order == 1 and zeta[self.axis] == 1:
            return 1.0
        return 0.0

    def to_json(self):
        return {"kind": "coordinate", "axis": self.axis}


@dataclass(frozen=True)
class Const(ModelFunction):
    """A literal scalar inside an expression tree."""

    value: float

    kind = "const"

    def eval(self, x) -> float:
        return float(self.value)

    def eval_derivative(self, zeta, x) -> float:
        return float(self.value) if sum(as_multiindex(zeta)) == 0 else 0.0

    def to_json(self):
        return {"kind": "const", "value": float(self.value)}


@dataclass(frozen=True)
class Sum(ModelFunction):
    terms: tuple

    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def eval(self, x) -> float:
        return float(sum(t.eval(x) for t in self.terms))

    def eval_derivative(self, zeta, x) -> float:
        # differentiation is linear, so recursion stays exact for exact children
        return float(sum(t.eval_derivative(zeta, x) for t in self.terms))

    def to_json(self):
        return {"kind": "sum", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Product(ModelFunction):
    factors: tuple

    kind = "product"

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def eval(self, x) -> float:
        out = 1.0
        for f in self.factors:
            out *= f.eval(x)
        return float(out)

    def to_json(self):
        return {"kind": "product", "factors": [f.to_json() for f in self.factors]}


@dataclass(frozen=True)
class Polynomial(ModelFunction):
    """Shifted polynomial sum_t coeff_t * (x - shift)^powers_t with exact derivatives."""

    terms: tuple
    shift: tuple

    kind = "polynomial"

    def __post_init__(self):
        shift = tuple(float(v) for v in self.shift)
        terms = tuple((float(c), as_multiindex(p)) for c, p in self.terms)
        for _, powers in terms:
            if len(powers) != len(shift):
                raise ValueError("term powers and shift must share a dimension")
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "terms", terms)

    def eval(self, x) -> float:
        d = np.asarray(x, dtype=float) - np.array(self.shift)
        return float(sum(c * np.prod(d ** np.array(p)) for c, p in self.terms))

    def eval_derivative(self, zeta, x) -> float:
        zeta = as_multiindex(zeta)
        d = np.asarray(x, dtype=float) - np.array(self.shift)
        out = 0.0
        for c, powers in self.terms:
            coef = c
            rest = []
            dead = False
            for a, z in zip(powers, zeta):
                if z > a:
                    dead = True
                    break
                coef *= math.perm(a, z)
                rest.append(a - z)
            if not dead:
                out += coef * float(np.prod(d ** np.array(rest)))
        return out

    def to_json(self):
        return {
            "kind": "polynomial",
            "shift": list(self.shift),
            "terms": [[c, list(p)] for c, p in self.terms],
        }


_KINDS = {
    "monomial": lambda d: Monomial(tuple(d["exponents"])),
    "inverse_distance": lambda d: InverseDistance(tuple(d["source"]), d.get("power", 1.0)),
    "constant": lambda d: Constant(),
    "sinusoid": lambda d: Sinusoid(tuple(d["frequency"]), d.get("phase", 0.0), d.get("flavor", "sin")),
    "coordinate": lambda d: Coordinate(int(d["axis"])),
    "const": lambda d: Const(float(d["value"])),
    "sum": lambda d: Sum(tuple(function_from_json(t) for t in d["terms"])),
    "product": lambda d: Product(tuple(function_from_json(t) for t in d["factors"])),
    "polynomial": lambda d: Polynomial(
        tuple((c, tuple(p)) for c, p in d["terms"]),
        tuple(d.get("shift", (0.0,) * len(d["terms"][0][1]))),
    ),
}


def function_from_json(data: dict) -> ModelFunction:
    try:
        kind = data["kind"]
    except (TypeError, KeyError):
        raise ValueError(f"function spec must be an object with a 'kind': {data!r}") from None
    try:
        builder = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown function kind {kind!r}") from None
    return builder(data)


class _CallableField(ModelFunction):
    """Adapter giving a bare callable the derivative interface (via differences)."""

    kind = "callable"

    def __init__(self, fn):
        self._fn = fn

    def eval(self, x) -> float:
        return float(self._fn(np.asarray(x, dtype=float)))


def as_field(obj) -> ModelFunction:
    """Coerce a model function or plain callable into the field interface."""
    if isinstance(obj, ModelFunction):
        return obj
    if callable(obj):
        return _CallableField(obj)
    raise TypeError(f"cannot evaluate {type(obj).__name__} as a field")


@dataclass(frozen=True)
class ModelSpec:
    """Ordered family of model functions over a common domain dimension."""

    functions: tuple
    dim: int

    def __post_init__(self):
        funcs = tuple(self.functions)
        if not funcs:
            raise ValueError("a model needs at least one function")
        object.__setattr__(self, "functions", funcs)

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i) -> ModelFunction:
        return self.functions[i]

    @classmethod
    def monomials(cls, L: LowerSet) -> "ModelSpec":
        return cls(tuple(Monomial(a) for a in L.elements), L.dim)

    def to_json(self):
        return [f.to_json() for f in self.functions]

    @classmethod
    def from_json(cls, data, dim: int) -> "ModelSpec":
        return cls(tuple(function_from_json(d) for d in data), dim)
