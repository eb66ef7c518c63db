"""Scenario files, result records, and delimited grid output.

A scenario bundles the sensor placement, the field model (a monomial
expansion or an explicit function family), optional readings/weights/resource
budgets, and the list of targets.  JSON is the single on-disk format,
versioned with a ``"version": 1`` field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicatePointError, FieldSenseError, ScenarioError
from .estimators import TargetSpec
from .model_functions import ModelFunction, ModelSpec, Polynomial, function_from_json
from .multiindex import LowerSet
from .placement import PointSet, find_lower_set_relabeling

SCHEMA_VERSION = 1

_FIXTURE_DIR = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. 'magnetic', 'gravitic')."""
    path = _FIXTURE_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in _FIXTURE_DIR.glob("*.json"))
        raise ValueError(f"no fixture {name!r}; available: {available}")
    return path


@dataclass
class Scenario:
    dimension: int
    sensors: PointSet
    model_type: str                 # "monomials" | "functions"
    lower_set: LowerSet | None      # explicit expansion orders, or None
    lower_set_auto: bool            # True when the expansion comes from the placement
    functions: ModelSpec | None
    targets: tuple = ()
    field_values: np.ndarray | None = None
    weights: tuple | None = None    # ("diagonal", vector) | ("full", matrix)
    resources: tuple | None = None  # (N, repetitions)
    version: int = SCHEMA_VERSION

    def resolve_lower_set(self):
        """(LowerSet, Relabeling | None) for a monomial model."""
        if self.model_type != "monomials":
            raise ScenarioError("model: not a monomial model")
        if self.lower_set is not None:
            return self.lower_set, None
        found = find_lower_set_relabeling(self.sensors)
        if found is None:
            raise ScenarioError(
                "model.lower_set: 'auto' requires a placement equivalent to a lower set; "
                "none found -- give an explicit lower_set"
            )
        return found

    def model(self):
        """LowerSet or ModelSpec, ready for estimator synthesis."""
        if self.model_type == "monomials":
            return self.resolve_lower_set()[0]
        return self.functions

    def omega(self):
        return self.weights[1] if self.weights is not None else None

    def to_json(self) -> dict:
        out: dict = {
            "version": self.version,
            "dimension": self.dimension,
            "sensors": self.sensors.to_json(),
        }
        if self.model_type == "monomials":
            out["model"] = {
                "type": "monomials",
                "lower_set": "auto" if self.lower_set_auto else self.lower_set.to_json(),
            }
        else:
            out["model"] = {"type": "functions", "functions": self.functions.to_json()}
        if self.field_values is not None:
            out["field_values"] = [float(v) for v in self.field_values]
        if self.weights is not None:
            kind, data = self.weights
            out["weights"] = {kind: np.asarray(data).tolist()}
        if self.resources is not None:
            out["resources"] = {"N": self.resources[0], "repetitions": self.resources[1]}
        out["targets"] = [t.to_json() for t in self.targets]
        return out


def _fail(path: str, message: str):
    raise ScenarioError(f"{path}: {message}")


def _require(data: dict, key: str, path: str):
    if key not in data:
        _fail(path or key, f"missing required field {key!r}")
    return data[key]


def _as_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        _fail("$", "scenario must be a JSON object")
    version = _require(data, "version", "version")
    if version != SCHEMA_VERSION:
        _fail("version", f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    dimension = _require(data, "dimension", "dimension")
    if not isinstance(dimension, int) or dimension < 1:
        _fail("dimension", f"must be a positive integer, got {dimension!r}")

    raw_sensors = _require(data, "sensors", "sensors")
    if not isinstance(raw_sensors, list) or not raw_sensors:
        _fail("sensors", "must be a non-empty list of points")
    for i, row in enumerate(raw_sensors):
        if not isinstance(row, list) or len(row) != dimension:
            _fail(f"sensors[{i}]", f"point must have {dimension} coordinates")
    try:
        sensors = PointSet(raw_sensors)
    except DuplicatePointError as exc:
        _fail("sensors", str(exc))
    except ValueError as exc:
        _fail("sensors", str(exc))

    model = _require(data, "model", "model")
    mtype = _require(model, "type", "model.type")
    lower_set = None
    lower_auto = False
    functions = None
    if mtype == "monomials":
        spec = _require(model, "lower_set", "model.lower_set")
        if spec == "auto":
            lower_auto = True
        else:
            try:
                lower_set = LowerSet(dimension, tuple(tuple(a) for a in spec))
            except (ValueError, FieldSenseError) as exc:
                _fail("model.lower_set", str(exc))
            if len(lower_set) != len(sensors):
                _fail(
                    "model.lower_set",
                    f"{len(lower_set)} expansion orders for {len(sensors)} sensors",
                )
    elif mtype == "functions":
        raw_funcs = _require(model, "functions", "model.functions")
        if not isinstance(raw_funcs, list) or not raw_funcs:
            _fail("model.functions", "must be a non-empty list")
        built = []
        for i, fd in enumerate(raw_funcs):
            try:
                built.append(function_from_json(fd))
            except ValueError as exc:
                _fail(f"model.functions[{i}]", str(exc))
        functions = ModelSpec(tuple(built), dimension)
        if len(functions) > len(sensors):
            _fail("model.functions", f"{len(functions)} functions but only {len(sensors)} sensors")
    else:
        _fail("model.type", f"must be 'monomials' or 'functions', got {mtype!r}")

    field_values = None
    if "field_values" in data:
        fv = data["field_values"]
        if not isinstance(fv, list) or len(fv) != len(sensors):
            _fail("field_values", f"must list one reading per sensor ({len(sensors)})")
        field_values = np.array(fv, dtype=float)

    weights = None
    if "weights" in data:
        wd = data["weights"]
        if not isinstance(wd, dict) or len(wd) != 1 or next(iter(wd)) not in ("diagonal", "full"):
            _fail("weights", "must be {'diagonal': [...]} or {'full': [[...]]}")
        kind = next(iter(wd))
        arr = np.array(wd[kind], dtype=float)
        if kind == "diagonal":
            if arr.shape != (len(sensors),) or np.any(arr <= 0):
                _fail("weights.diagonal", f"needs {len(sensors)} positive entries")
        else:
            if arr.shape != (len(sensors),) * 2:
                _fail("weights.full", f"needs a {len(sensors)} x {len(sensors)} matrix")
            try:
                np.linalg.cholesky(arr)
            except np.linalg.LinAlgError:
                _fail("weights.full", "matrix must be symmetric positive definite")
        weights = (kind, arr)

    resources = None
    if "resources" in data:
        rd = data["resources"]
        total = _require(rd, "N", "resources.N")
        if not isinstance(total, (int, float)) or total <= 0:
            _fail("resources.N", f"must be positive, got {total!r}")
        reps = rd.get("repetitions", 1)
        if not isinstance(reps, int) or reps < 1:
            _fail("resources.repetitions", f"must be a positive integer, got {reps!r}")
        resources = (float(total), reps)

    targets = []
    for i, td in enumerate(data.get("targets", [])):
        try:
            target = TargetSpec.from_json(td)
        except (ValueError, KeyError, TypeError) as exc:
            _fail(f"targets[{i}]", f"bad target spec: {exc}")
        _validate_target(target, dimension, f"targets[{i}]")
        targets.append(target)

    return Scenario(
        dimension=dimension,
        sensors=sensors,
        model_type=mtype,
        lower_set=lower_set,
        lower_set_auto=lower_auto,
        functions=functions,
        targets=tuple(targets),
        field_values=field_values,
        weights=weights,
        resources=resources,
        version=version,
    )


def _validate_target(target: TargetSpec, dimension: int, path: str):
    if target.kind in ("interpolate", "derivative") and len(target.point) != dimension:
        _fail(path, f"target point must have {dimension} coordinates")
    if target.kind == "derivative" and len(target.order) != dimension:
        _fail(path, f"derivative order must have {dimension} entries")
    if target.kind == "combination":
        for j, (_, sub) in enumerate(target.terms):
            _validate_target(sub, dimension, f"{path}.terms[{j}]")


def load_scenario(source) -> Scenario:
    """Parse and validate a scenario from a path, stream, or parsed dict."""
    if isinstance(source, dict):
        return _as_scenario(source)
    if hasattr(source, "read"):
        return _as_scenario(json.load(source))
    with open(source, "r", encoding="utf-8") as fh:
        return _as_scenario(json.load(fh))


def dump_scenario(scenario: Scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_json(), fh, indent=2)
        fh.write("\n")


def emit_grid_csv(rows, path, dimension: int | None = None):
    """Write (point, value) rows as CSV: header x1..xm,value, 17 significant digits.

    Row order is the caller's; map sweeps pass row-major grids.
    """
    rows = list(rows)
    if rows:
        dimension = len(rows[0][0])
    elif dimension is None:
        raise ValueError("dimension is required to write a header-only file")
    header = ",".join(f"x{j + 1}" for j in range(dimension)) + ",value"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for point, value in rows:
            coords = ",".join(f"{float(v):.17g}" for v in point)
            fh.write(f"{coords},{float(value):.17g}\n")


def parse_field_spec(spec) -> ModelFunction:
    """Field description for error maps: a function spec or polynomial shorthand.

    Accepts a dict (or JSON string, or ``@path`` to a JSON file) that is
    either a regular function object with a ``kind`` or the compact
    ``{"shift": [...], "terms": [[coeff, [powers...]], ...]}`` polynomial form.
    """
    if isinstance(spec, str):
        if spec.startswith("@"):
            with open(spec[1:], "r", encoding="utf-8") as fh:
                spec = json.load(fh)
        else:
            try:
                spec = json.loads(spec)
            except json.JSONDecodeError as exc:
                raise ValueError(f"field spec is not valid JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise ValueError("field spec must be a JSON object")
    if "kind" in spec:
        return function_from_json(spec)
    if "terms" in spec:
        terms = tuple((float(c), tuple(p)) for c, p in spec["terms"])
        dim = len(terms[0][1])
        shift = tuple(spec.get("shift", (0.0,) * dim))
        return Polynomial(terms, shift)
    raise ValueError("field spec needs a 'kind' or polynomial 'terms'")


@dataclass
class ResultRecord:
    """One estimator run: coefficients, prediction, per-strategy variances, flags."""

    target_index: int
    target: TargetSpec
    c: np.ndarray
    predicted: float | None
    variances: dict = field(default_factory=dict)
    error_free: bool = True
    condition_number: float = 1.0
    warnings: tuple = ()
    bias_direction: np.ndarray | None = None
    method: str = ""

    def to_json(self) -> dict:
        out = {
            "target_index": self.target_index,
            "target": self.target.to_json(),
            "c": [float(v) for v in self.c],
            "method": self.method,
            "condition_number": float(self.condition_number),
            "error_free": bool(self.error_free),
        }
        if self.predicted is not None:
            out["predicted"] = float(self.predicted)
        if self.variances:
            out["variances"] = {k: float(v) for k, v in self.variances.items()}
        if self.warnings:
            out["warnings"] = list(self.warnings)
        if self.bias_direction is not None:
            out["bias_direction"] = [float(v) for v in self.bias_direction]
        return out
