"""Coefficient-vector synthesis: one weight per sensor for each field target.

Every target (a field value, a derivative, one model coefficient, or a linear
functional of the coefficients) reduces to a vector c with target ~= c . F,
where F holds the sensor readings.  Monomial systems are always solved in a
locally rescaled frame to keep the conditioning honest; the chain-rule factor
is applied back onto c for derivative targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, RankDeficiencyError
from .linear_systems import (
    CONDITION_WARNING_THRESHOLD,
    RankReport,
    build_alternant,
    build_design,
    error_subspace,
    rank_report,
    weighted_pseudo_inverse_apply,
)
from .model_functions import ModelFunction, ModelSpec, as_field
from .multiindex import LowerSet, as_multiindex, componentwise_leq
from .placement import PointSet

#: A target this close (relative, per axis) to a sensor is the sensor.
SNAP_RTOL = 1e-9

#: Relative kernel leakage below which a coefficient functional counts as
#: free of construction error.
NULL_PROJECTION_RTOL = 1e-8


@dataclass(frozen=True)
class TargetSpec:
    """What the estimator is for: a value, a derivative, a coefficient, or a
    linear functional / combination thereof."""

    kind: str
    point: tuple | None = None
    order: tuple | None = None
    index: int | None = None
    b: tuple | None = None
    terms: tuple | None = None

    @classmethod
    def interpolate(cls, point) -> "TargetSpec":
        return cls("interpolate", point=tuple(float(v) for v in point))

    @classmethod
    def derivative(cls, point, order) -> "TargetSpec":
        return cls(
            "derivative",
            point=tuple(float(v) for v in point),
            order=as_multiindex(order),
        )

    @classmethod
    def isolate(cls, index: int) -> "TargetSpec":
        return cls("isolate", index=int(index))

    @classmethod
    def linear_functional(cls, b) -> "TargetSpec":
        return cls("linear_functional", b=tuple(float(v) for v in b))

    @classmethod
    def combination(cls, terms) -> "TargetSpec":
        return cls(
            "combination",
            terms=tuple((float(w), t) for w, t in terms),
        )

    def to_json(self) -> dict:
        if self.kind == "interpolate":
            return {"kind": "interpolate", "point": list(self.point)}
        if self.kind == "derivative":
            return {"kind": "derivative", "point": list(self.point), "order": list(self.order)}
        if self.kind == "isolate":
            return {"kind": "isolate", "index": self.index}
        if self.kind == "linear_functional":
            return {"kind": "linear_functional", "b": list(self.b)}
        if self.kind == "combination":
            return {
                "kind": "combination",
                "terms": [{"weight": w, "target": t.to_json()} for w, t in self.terms],
            }
        raise ValueError(f"unknown target kind {self.kind!r}")

    @classmethod
    def from_json(cls, data: dict) -> "TargetSpec":
        kind = data.get("kind")
        if kind == "interpolate":
            return cls.interpolate(data["point"])
        if kind == "derivative":
            return cls.derivative(data["point"], data["order"])
        if kind == "isolate":
            return cls.isolate(data["index"])
        if kind == "linear_functional":
            return cls.linear_functional(data["b"])
        if kind == "combination":
            return cls.combination(
                [(t["weight"], cls.from_json(t["target"])) for t in data["terms"]]
            )
        raise ValueError(f"unknown target kind {kind!r}")


@dataclass
class Estimator:
    """Coefficient vector plus provenance: conditioning, error-freeness, route."""

    c: np.ndarray
    target: TargetSpec
    method: str
    condition_number: float
    error_free: bool
    bias_direction: np.ndarray | None = None
    warnings: tuple = ()
    sensors: PointSet | None = None

    def predict(self, field_values) -> float:
        values = np.asarray(field_values, dtype=float)
        if values.shape != self.c.shape:
            raise ValueError(f"expected {self.c.shape[0]} field values")
        return float(self.c @ values)

    def to_json(self) -> dict:
        out = {
            "c": [float(v) for v in self.c],
            "target": self.target.to_json(),
            "method": self.method,
            "condition_number": float(self.condition_number),
            "error_free": bool(self.error_free),
        }
        if self.bias_direction is not None:
            out["bias_direction"] = [float(v) for v in self.bias_direction]
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def _condition_warnings(cond: float) -> tuple:
    if cond > CONDITION_WARNING_THRESHOLD:
        return (f"condition number {cond:.3e} exceeds {CONDITION_WARNING_THRESHOLD:.0e}",)
    return ()


def _snap_index(X: PointSet, x_t: np.ndarray):
    spread = X.points.max(axis=0) - X.points.min(axis=0)
    tol = SNAP_RTOL * np.maximum(1.0, spread)
    hits = np.all(np.abs(X.points - x_t) <= tol, axis=1)
    idx = np.flatnonzero(hits)
    return int(idx[0]) if idx.size else None


def _scaled_monomial_system(X: PointSet, L: LowerSet, origin: np.ndarray):
    """Vandermonde of (X - origin)/h with per-axis h = max |delta|; returns (V, h, A)."""
    delta = X.points - origin
    half = np.abs(delta).max(axis=0)
    half = np.where(half == 0.0, 1.0, half)
    A = np.array(L.elements, dtype=float)
    V = np.prod((delta / half)[:, None, :] ** A[None, :, :], axis=2)
    return V, half, A


def _monomial_kernel_message(V: np.ndarray, L: LowerSet, report: RankReport) -> str:
    _, s, vt = np.linalg.svd(V)
    combos = []
    for row in vt[report.numerical_rank:]:
        parts = [
            f"{row[j]:+.3g}*x^{L.elements[j]}"
            for j in range(len(row))
            if abs(row[j]) > 1e-10
        ]
        combos.append(" ".join(parts))
    return "; ".join(combos)


def _qr_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    y = scipy.linalg.solve_triangular(r, q.T @ rhs)
    x = np.empty_like(y)
    x[piv] = y
    return x


def _factorial_prod(zeta) -> float:
    out = 1.0
    for z in zeta:
        out *= math.factorial(z)
    return out


def _vandermonde_estimator(X: PointSet, L: LowerSet, x_t, zeta, method: str) -> Estimator:
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (X.dim,):
        raise DimensionMismatchError(f"target point must have dimension {X.dim}")
    if len(X) != len(L):
        raise ValueError(f"need as many points as expansion orders: {len(X)} vs {len(L)}")
    zeta = as_multiindex(zeta)
    if len(zeta) != X.dim:
        raise DimensionMismatchError(f"derivative order must have dimension {X.dim}")
    interpolating = sum(zeta) == 0

    if interpolating:
        j = _snap_index(X, x_t)
        if j is not None and (0,) * X.dim in L:
            c = np.zeros(len(X))
            c[j] = 1.0
            target = TargetSpec.interpolate(x_t)
            return Estimator(c, target, f"{method}/nodal", 1.0, True, sensors=X)

    if method == "direct":
        if zeta not in L:
            raise ValueError(
                f"derivative order {zeta} is outside the expansion set; "
                "use the nearest_sensor route or enlarge the lower set"
            )
        origin = x_t
    elif method == "nearest_sensor":
        dist = np.max(np.abs(X.points - x_t), axis=1)
        origin = X.points[int(np.argmin(dist))]
    else:
        raise ValueError(f"unknown method {method!r}; expected 'direct' or 'nearest_sensor'")

    V, half, A = _scaled_monomial_system(X, L, origin)
    report = rank_report(V)
    if report.numerical_rank < len(X):
        raise RankDeficiencyError(
            "placement cannot resolve the expansion: vanishing monomial combinations "
            f"{_monomial_kernel_message(V, L, report)}",
            report=report,
        )

    if method == "direct":
        rhs = np.zeros(len(L))
        rhs[L.index(zeta)] = _factorial_prod(zeta)
    else:
        ts = (x_t - origin) / half
        rhs = np.zeros(len(L))
        for k, alpha in enumerate(L.elements):
            if componentwise_leq(zeta, alpha):
                coef = 1.0
                for a, z in zip(alpha, zeta):
                    coef *= math.perm(a, z)
                rest = np.array(alpha) - np.array(zeta)
                rhs[k] = coef * float(np.prod(ts ** rest))
        if not np.any(rhs):
            raise ValueError(
                f"derivative order {zeta} exceeds every expansion order; "
                "the estimator would be identically zero"
            )

    c = _qr_solve(V.T, rhs)
    c *= float(np.prod(half ** -np.array(zeta, dtype=float)))
    target = TargetSpec.interpolate(x_t) if interpolating else TargetSpec.derivative(x_t, zeta)
    return Estimator(
        c,
        target,
        method,
        report.condition_number,
        True,
        warnings=_condition_warnings(report.condition_number),
        sensors=X,
    )


def interpolation_estimator(X: PointSet, L: LowerSet, x_t, method: str = "direct") -> Estimator:
    """Weights for the field value at ``x_t`` from the monomial family on ``L``."""
    return _vandermonde_estimator(X, L, x_t, (0,) * X.dim, method)


def derivative_estimator(X: PointSet, L: LowerSet, x_t, zeta, method: str = "direct") -> Estimator:
    """Weights for the derivative of order ``zeta`` at ``x_t``."""
    return _vandermonde_estimator(X, L, x_t, zeta, method)


def _exact_functional_estimator(X: PointSet, F: ModelSpec, b: np.ndarray, method: str,
                                target: TargetSpec, omega=None) -> Estimator:
    """c from the square alternant when it is invertible, else GLS semantics."""
    A = build_alternant(X, F)
    report = rank_report(A)
    if report.numerical_rank == len(F):
        c = _qr_solve(A.entries.T, b)
        return Estimator(
            c,
            target,
            method,
            report.condition_number,
            True,
            warnings=_condition_warnings(report.condition_number),
            sensors=X,
        )
    est = gls_estimator(X, F, b, omega=omega)
    return Estimator(
        est.c,
        target,
        f"{method}/pseudo",
        est.condition_number,
        est.error_free,
        bias_direction=est.bias_direction,
        warnings=est.warnings,
        sensors=X,
    )


def isolation_estimator(X: PointSet, F: ModelSpec, t: int) -> Estimator:
    """Weights recovering the coefficient of the t-th model function."""
    if not 0 <= t < len(F):
        raise ValueError(f"signal index {t} out of range for {len(F)} functions")
    if len(X) != len(F):
        raise ValueError(f"signal isolation needs p = k, got p={len(X)}, k={len(F)}")
    b = np.zeros(len(F))
    b[t] = 1.0
    return _exact_functional_estimator(X, F, b, "isolation", TargetSpec.isolate(t))


def model_eval_estimator(X: PointSet, F: ModelSpec, x_t, zeta=None) -> Estimator:
    """Weights for the model value (or derivative) at ``x_t``."""
    x_t = np.asarray(x_t, dtype=float)
    if zeta is None:
        zeta = (0,) * F.dim
    zeta = as_multiindex(zeta)
    if len(X) != len(F):
        raise ValueError(f"model evaluation needs p = k, got p={len(X)}, k={len(F)}")
    b = np.array([f.eval_derivative(zeta, x_t) for f in F])
    target = (
        TargetSpec.interpolate(x_t)
        if sum(zeta) == 0
        else TargetSpec.derivative(x_t, zeta)
    )
    return _exact_functional_estimator(X, F, b, "model_eval", target)


def gls_estimator(X: PointSet, F: ModelSpec, b, omega=None) -> Estimator:
    """Generalized least-squares weights for the coefficient functional b . beta.

    Rank deficiency is not a failure here: the result carries the projection
    of ``b`` onto the kernel as its bias direction, and ``error_free`` records
    whether the functional escapes the kernel entirely.
    """
    b = np.asarray(b, dtype=float)
    D = build_design(X, F)
    report = rank_report(D)
    c = weighted_pseudo_inverse_apply(D, b, omega)
    sub = error_subspace(D)
    if sub.kernel_dim:
        proj = sub.null_basis @ (sub.null_basis.T @ b)
    else:
        proj = np.zeros_like(b)
    leak = float(np.linalg.norm(proj))
    error_free = leak <= NULL_PROJECTION_RTOL * max(float(np.linalg.norm(b)), 1e-300)
    warnings = _condition_warnings(report.condition_number)
    if not error_free:
        warnings = warnings + (
            f"target functional leaks into the unresolvable subspace (|projection| = {leak:.3e})",
        )
    return Estimator(
        c,
        TargetSpec.linear_functional(b),
        "gls",
        report.condition_number,
        error_free,
        bias_direction=None if error_free else proj,
        warnings=warnings,
        sensors=X,
    )


def combine(terms) -> Estimator:
    """Weighted sum of estimators over one shared placement."""
    terms = [(float(w), e) for w, e in terms]
    if not terms:
        raise ValueError("need at least one (weight, estimator) pair")
    first = terms[0][1]
    for _, e in terms:
        if e.c.shape != first.c.shape:
            raise ValueError("estimators combine only over the same sensor set")
        if (
            e.sensors is not None
            and first.sensors is not None
            and not np.array_equal(e.sensors.points, first.sensors.points)
        ):
            raise ValueError("estimators combine only over the same sensor set")
    c = np.zeros_like(first.c)
    warnings: tuple = ()
    for w, e in terms:
        c = c + w * e.c
        warnings += tuple(msg for msg in e.warnings if msg not in warnings)
    return Estimator(
        c,
        TargetSpec.combination([(w, e.target) for w, e in terms]),
        "combination",
        max(e.condition_number for _, e in terms),
        all(e.error_free for _, e in terms),
        warnings=warnings,
        sensors=first.sensors,
    )


def _true_target_value(target: TargetSpec, fld: ModelFunction) -> float:
    if target.kind == "interpolate":
        return fld.eval(np.array(target.point))
    if target.kind == "derivative":
        return fld.eval_derivative(target.order, np.array(target.point))
    if target.kind == "combination":
        return sum(w * _true_target_value(t, fld) for w, t in target.terms)
    raise ValueError(
        f"target kind {target.kind!r} has no pointwise truth under a field oracle"
    )


def residual(estimator: Estimator, X: PointSet, true_field) -> float:
    """|c . F_true - exact target| for a known field."""
    fld = as_field(true_field)
    readings = np.array([fld.eval(x) for x in X.points])
    return abs(estimator.predict(readings) - _true_target_value(estimator.target, fld))


class _FactoredSquare:
    """Column-pivoted QR of one square system, reused across many right-hand sides."""

    def __init__(self, a: np.ndarray):
        self._q, self._r, self._piv = scipy.linalg.qr(a, mode="economic", pivoting=True)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = scipy.linalg.solve_triangular(self._r, self._q.T @ rhs)
        x = np.empty_like(y)
        x[self._piv] = y
        return x


def _chunked_solve(factored: _FactoredSquare, build_rhs, n_targets: int, workers: int):
    """Solve build_rhs(chunk) for index chunks, deterministically ordered."""
    if workers <= 1 or n_targets <= workers:
        return factored.solve(build_rhs(np.arange(n_targets)))
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(np.arange(n_targets), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: factored.solve(build_rhs(idx)), chunks))
    return np.hstack(parts)


def interpolation_weight_matrix(X: PointSet, L: LowerSet, targets, zeta=None, workers: int = 1):
    """Weights for many targets from a single factorization.

    Expands about the bounding-box center in the rescaled frame -- the same
    linear functional as the per-target routes, synthesized in one solve with
    one right-hand side per target.  Columns for targets sitting on sensors
    are snapped to exact unit vectors (value targets only).  Returns
    ``(p x T weight matrix, rank report)``.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape[1] != X.dim:
        raise DimensionMismatchError(f"targets must have dimension {X.dim}")
    if zeta is None:
        zeta = (0,) * X.dim
    zeta = as_multiindex(zeta)

    lo = X.points.min(axis=0)
    hi = X.points.max(axis=0)
    origin = (lo + hi) / 2.0
    V, half, A = _scaled_monomial_system(X, L, origin)
    report = rank_report(V)
    if report.numerical_rank < len(X):
        raise RankDeficiencyError(
            "placement cannot resolve the expansion: vanishing monomial combinations "
            f"{_monomial_kernel_message(V, L, report)}",
            report=report,
        )

    ts = (targets - origin) / half
    zeta_arr = np.array(zeta, dtype=float)

    def build_rhs(idx):
        block = ts[idx]
        if sum(zeta) == 0:
            return np.prod(block[:, None, :] ** A[None, :, :], axis=2).T
        rhs = np.zeros((len(L), len(idx)))
        for k, alpha in enumerate(L.elements):
            if componentwise_leq(zeta, alpha):
                coef = 1.0
                for a, z in zip(alpha, zeta):
                    coef *= math.perm(a, z)
                rest = np.array(alpha) - zeta_arr
                rhs[k] = coef * np.prod(block**rest, axis=1)
        return rhs

    factored = _FactoredSquare(V.T)
    weights = _chunked_solve(factored, build_rhs, targets.shape[0], workers)
    weights *= float(np.prod(half**-zeta_arr))

    if sum(zeta) == 0 and (0,) * X.dim in L:
        spread = np.maximum(1.0, hi - lo)
        tol = SNAP_RTOL * spread
        for j in range(len(X)):
            on_node = np.all(np.abs(targets - X.points[j]) <= tol, axis=1)
            if np.any(on_node):
                weights[:, on_node] = 0.0
                weights[j, on_node] = 1.0
    return weights, report


def model_weight_matrix(X: PointSet, F: ModelSpec, targets, zeta=None, workers: int = 1):
    """Function-model analogue of :func:`interpolation_weight_matrix`.

    One alternant factorization; each target contributes the right-hand side
    of (derivative) function evaluations.  Returns ``(p x T, rank report)``.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape[1] != F.dim:
        raise DimensionMismatchError(f"targets must have dimension {F.dim}")
    if zeta is None:
        zeta = (0,) * F.dim
    zeta = as_multiindex(zeta)
    A = build_alternant(X, F)
    report = rank_report(A)
    if report.numerical_rank < len(F):
        raise RankDeficiencyError(
            f"alternant matrix has numerical rank {report.numerical_rank} < {len(F)}",
            report=report,
        )

    def build_rhs(idx):
        rhs = np.empty((len(F), len(idx)))
        for col, t in enumerate(idx):
            for j, f in enumerate(F):
                rhs[j, col] = f.eval_derivative(zeta, targets[t])
        return rhs

    factored = _FactoredSquare(A.entries.T)
    weights = _chunked_solve(factored, build_rhs, targets.shape[0], workers)
    return weights, report


def synthesize(X: PointSet, model, target: TargetSpec, method: str = "direct",
               omega=None) -> Estimator:
    """Route a target spec to the matching construction.

    ``model`` is a :class:`LowerSet` (monomial expansion) or a
    :class:`ModelSpec` (explicit signal family).
    """
    if target.kind == "combination":
        return combine(
            [(w, synthesize(X, model, t, method=method, omega=omega)) for w, t in target.terms]
        )
    if isinstance(model, LowerSet):
        if target.kind == "interpolate":
            return interpolation_estimator(X, model, target.point, method=method)
        if target.kind == "derivative":
            return derivative_estimator(X, model, target.point, target.order, method=method)
        monomials = ModelSpec.monomials(model)
        if target.kind == "isolate":
            return isolation_estimator(X, monomials, target.index)
        if target.kind == "linear_functional":
            return gls_estimator(X, monomials, target.b, omega=omega)
    elif isinstance(model, ModelSpec):
        if target.kind == "interpolate":
            return model_eval_estimator(X, model, target.point)
        if target.kind == "derivative":
            return model_eval_estimator(X, model, target.point, target.order)
        if target.kind == "isolate":
            return isolation_estimator(X, model, target.index)
        if target.kind == "linear_functional":
            return gls_estimator(X, model, target.b, omega=omega)
    else:
        raise TypeError(f"model must be a LowerSet or ModelSpec, got {type(model).__name__}")
    raise ValueError(f"unknown target kind {target.kind!r}")
