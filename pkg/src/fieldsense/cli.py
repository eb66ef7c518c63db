"""Command-line front end: placement checks, estimation, maps, allocation.

Exit codes: 0 success, 1 analytic/validation failure (rank deficiency,
Monte Carlo disagreement), 2 input error.  Map commands write CSV and can
render a matching figure alongside it.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .allocation import (
    analytic_variance,
    classical_allocation,
    local_allocation,
    allocate_general,
    monte_carlo_variance,
    nonlocal_allocation,
    round_allocation,
)
from .errors import FieldSenseError, RankDeficiencyError
from .estimators import (
    interpolation_weight_matrix,
    model_weight_matrix,
    synthesize,
)
from .linear_systems import (
    build_alternant,
    build_design,
    build_vandermonde,
    error_subspace,
    rank_report,
    vandermonde_rank_certificate,
)
from .placement import find_lower_set_relabeling, is_equivalent
from .scenario_io import (
    ResultRecord,
    Scenario,
    emit_grid_csv,
    load_scenario,
    parse_field_spec,
)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FIELDSENSE_THREADS", "1")))
    except ValueError:
        return 1


def _parse_vector(text: str, flag: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise ValueError(f"{flag} expects a comma-separated list of numbers, got {text!r}") from None


def _parse_grid(text: str, dim: int) -> tuple:
    parts = [p for p in text.split(",") if p.strip() != ""]
    try:
        counts = tuple(int(p) for p in parts)
    except ValueError:
        raise ValueError(f"--grid expects integers, got {text!r}") from None
    if len(counts) == 1:
        counts = counts * dim
    if len(counts) != dim or any(n < 1 for n in counts):
        raise ValueError(f"--grid needs {dim} positive counts, got {text!r}")
    return counts


def _parse_bounds(text: str | None, scenario: Scenario) -> list:
    if text is None:
        lo = scenario.sensors.points.min(axis=0)
        hi = scenario.sensors.points.max(axis=0)
        return [(float(a), float(b)) for a, b in zip(lo, hi)]
    vals = _parse_vector(text, "--bounds")
    if len(vals) != 2 * scenario.dimension:
        raise ValueError(f"--bounds needs {2 * scenario.dimension} numbers (min,max per axis)")
    out = []
    for j in range(scenario.dimension):
        lo, hi = float(vals[2 * j]), float(vals[2 * j + 1])
        if hi < lo:
            raise ValueError(f"--bounds axis {j + 1}: max {hi} below min {lo}")
        out.append((lo, hi))
    return out


def _grid_points(bounds, counts):
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(bounds, counts)]
    if len(axes) == 1:
        return axes, axes[0][:, None]
    grids = np.meshgrid(*axes, indexing="ij")
    return axes, np.column_stack([g.ravel() for g in grids])


def _map_weights(scenario: Scenario, targets: np.ndarray) -> np.ndarray:
    if scenario.model_type == "monomials":
        L, _ = scenario.resolve_lower_set()
        weights, _ = interpolation_weight_matrix(
            scenario.sensors, L, targets, workers=_workers()
        )
    else:
        weights, _ = model_weight_matrix(
            scenario.sensors, scenario.functions, targets, workers=_workers()
        )
    return weights


def _maybe_plot(args, axes, values2d, scenario, label):
    if args.plot is None:
        return None
    from . import plots

    path = args.plot
    if path == "__auto__":
        path = str(Path(args.out).with_suffix(".png"))
    plots.render_grid_map(axes, values2d, scenario.sensors.points, path, label)
    return path


def _cmd_check_placement(args) -> int:
    scenario = load_scenario(args.scenario)
    X = scenario.sensors
    out: dict = {"sensors": len(X), "dimension": scenario.dimension, "model": scenario.model_type}

    if scenario.model_type == "monomials":
        if scenario.lower_set_auto:
            found = find_lower_set_relabeling(X)
            if found is None:
                out["equivalent"] = False
                _emit_check(out, args.json, note="no lower-set relabeling found; placement not certified")
                return 1
            L, relab = found
            out["equivalent"] = True
            out["relabeling"] = relab.to_json()
        else:
            L = scenario.lower_set
            out["equivalent"] = bool(is_equivalent(X, L))
        out["lower_set"] = L.to_json()
        report = vandermonde_rank_certificate(X, L)
        matrix = build_vandermonde(X, L)
        size = len(X)
    else:
        F = scenario.functions
        matrix = build_alternant(X, F) if len(X) == len(F) else build_design(X, F)
        report = rank_report(matrix)
        size = len(F)

    sub = error_subspace(matrix)
    out.update(
        rank=report.numerical_rank,
        columns=size,
        full_rank=report.numerical_rank == size,
        condition_number=report.condition_number,
        kernel_dimension=sub.kernel_dim,
        error_free_dimension=sub.error_free_dim,
        null_basis=[[float(v) for v in col] for col in sub.null_basis.T],
        error_free_basis=[[float(v) for v in col] for col in sub.error_free_basis.T],
    )
    _emit_check(out, args.json)
    return 0 if out["full_rank"] else 1


def _emit_check(out: dict, as_json: bool, note: str | None = None):
    if as_json:
        if note:
            out["note"] = note
        print(json.dumps(out, indent=2))
        return
    print(f"placement: {out['sensors']} sensors in dimension {out['dimension']} ({out['model']} model)")
    if "equivalent" in out:
        print(f"lower-set equivalent: {'yes' if out['equivalent'] else 'no'}")
    if "lower_set" in out:
        print(f"lower set: {out['lower_set']}")
    if note:
        print(note)
        return
    flag = "full" if out["full_rank"] else "DEFICIENT"
    print(f"rank: {out['rank']}/{out['columns']} ({flag})")
    print(f"condition number: {out['condition_number']:.6g}")
    print(f"kernel dimension: {out['kernel_dimension']}")
    print(f"error-free dimension: {out['error_free_dimension']}")
    for col in out["null_basis"]:
        print("  kernel vector: [" + ", ".join(f"{v:.6g}" for v in col) + "]")
    if out["null_basis"]:
        for col in out["error_free_basis"]:
            print("  error-free vector: [" + ", ".join(f"{v:.6g}" for v in col) + "]")


_STRATEGY_BUILDERS = {
    "nonlocal": nonlocal_allocation,
    "local": local_allocation,
    "classical": classical_allocation,
}


def _cmd_estimate(args) -> int:
    scenario = load_scenario(args.scenario)
    if not 0 <= args.target < len(scenario.targets):
        raise ValueError(
            f"--target {args.target} out of range; scenario has {len(scenario.targets)} targets"
        )
    target = scenario.targets[args.target]
    est = synthesize(
        scenario.sensors,
        scenario.model(),
        target,
        method=args.method,
        omega=scenario.omega(),
    )
    predicted = (
        est.predict(scenario.field_values) if scenario.field_values is not None else None
    )

    variances: dict = {}
    total, reps = None, 1
    if args.resources is not None:
        total, reps = args.resources, args.repetitions or 1
    elif scenario.resources is not None:
        total, reps = scenario.resources
        if args.repetitions:
            reps = args.repetitions
    if total is not None:
        for name in args.strategy.split(","):
            name = name.strip()
            if name not in _STRATEGY_BUILDERS:
                raise ValueError(f"unknown strategy {name!r}")
            variances[name] = _STRATEGY_BUILDERS[name](est.c, total, reps).variance

    record = ResultRecord(
        target_index=args.target,
        target=target,
        c=est.c,
        predicted=predicted,
        variances=variances,
        error_free=est.error_free,
        condition_number=est.condition_number,
        warnings=est.warnings,
        bias_direction=est.bias_direction,
        method=est.method,
    )
    payload = record.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"target {args.target}: {json.dumps(target.to_json())}")
        print(f"method: {est.method}")
        print("c: [" + ", ".join(f"{v:.12g}" for v in est.c) + "]")
        if predicted is not None:
            print(f"predicted: {predicted:.12g}")
        print(f"condition number: {est.condition_number:.6g}")
        print(f"error_free: {'yes' if est.error_free else 'no'}")
        for name, var in variances.items():
            print(f"variance[{name}]: {var:.12g}")
        for msg in est.warnings:
            print(f"warning: {msg}")
    return 0


def _cmd_gain_map(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.dimension > 2:
        raise ValueError("gain maps support 1-D and 2-D scenarios")
    counts = _parse_grid(args.grid, scenario.dimension)
    bounds = _parse_bounds(args.bounds, scenario)
    axes, targets = _grid_points(bounds, counts)
    weights = _map_weights(scenario, targets)
    absw = np.abs(weights)
    gains = np.sum(absw ** (2.0 / 3.0), axis=0) ** 3 / np.sum(absw, axis=0) ** 2
    emit_grid_csv(zip(targets, gains), args.out)
    figure = _maybe_plot(args, axes, gains.reshape(counts), scenario, "precision gain")
    print(f"wrote {targets.shape[0]} rows to {args.out}")
    if figure:
        print(f"wrote figure to {figure}")
    return 0


def _cmd_error_map(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.dimension > 2:
        raise ValueError("error maps support 1-D and 2-D scenarios")
    fld = parse_field_spec(args.field)
    counts = _parse_grid(args.grid, scenario.dimension)
    bounds = _parse_bounds(args.bounds, scenario)
    axes, targets = _grid_points(bounds, counts)
    weights = _map_weights(scenario, targets)
    readings = np.array([fld.eval(x) for x in scenario.sensors.points])
    truth = np.array([fld.eval(x) for x in targets])
    residuals = np.abs(weights.T @ readings - truth)
    emit_grid_csv(zip(targets, residuals), args.out)
    figure = _maybe_plot(args, axes, residuals.reshape(counts), scenario, "|interpolation error|")
    print(f"wrote {targets.shape[0]} rows to {args.out}")
    if figure:
        print(f"wrote figure to {figure}")
    return 0


def _cmd_allocate(args) -> int:
    c = _parse_vector(args.coeffs, "--coeffs")
    if args.strategy == "general":
        if args.p is None or args.q is None:
            raise ValueError("--strategy general needs --p and --q")
        result = allocate_general(c, args.resources, args.p, args.q, args.repetitions)
    else:
        result = _STRATEGY_BUILDERS[args.strategy](c, args.resources, args.repetitions)

    payload = result.to_json()
    rounded = None
    if args.round:
        rounded = round_allocation(result, c)
        payload["rounded"] = rounded.to_json()
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"strategy: {result.strategy}")
        print("n: [" + ", ".join(f"{v:.12g}" for v in result.n) + "]")
        print(f"variance: {result.variance:.12g}")
        if rounded is not None:
            print("rounded n: [" + ", ".join(str(int(v)) for v in rounded.n) + "]")
            print(f"rounded variance: {rounded.variance:.12g} (penalty {rounded.penalty:.3e})")
    return 0


def _cmd_validate_mc(args) -> int:
    c = _parse_vector(args.coeffs, "--coeffs")
    n = _parse_vector(args.alloc, "--alloc")
    if len(n) != len(c):
        raise ValueError("--alloc must match --coeffs in length")
    empirical = monte_carlo_variance(c, n, args.trials, args.seed, args.scaling)
    analytic = analytic_variance(c, n, args.scaling)
    stderr = analytic * math.sqrt(2.0 / (args.trials - 1))
    deviation = abs(empirical - analytic)
    ok = deviation <= 3.0 * stderr
    payload = {
        "scaling": args.scaling,
        "trials": args.trials,
        "seed": args.seed,
        "analytic_variance": analytic,
        "empirical_variance": empirical,
        "deviation": deviation,
        "standard_error": stderr,
        "within_3_sigma": ok,
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"analytic variance:  {analytic:.12g}")
        print(f"empirical variance: {empirical:.12g}")
        print(f"deviation: {deviation:.3e} ({deviation / stderr if stderr else math.inf:.2f} standard errors)")
        print("within 3 standard errors" if ok else "OUTSIDE 3 standard errors")
    return 0 if ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldsense",
        description="Linear estimators, placement certificates, and resource "
        "allocation for spatial sensing scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check-placement", help="certify placement rank and error-free subspace")
    sp.add_argument("scenario", help="scenario JSON file")
    sp.add_argument("--json", action="store_true", help="machine-readable output")
    sp.set_defaults(func=_cmd_check_placement)

    sp = sub.add_parser("estimate", help="synthesize the estimator for one scenario target")
    sp.add_argument("scenario")
    sp.add_argument("--target", type=int, required=True, help="index into the scenario target list")
    sp.add_argument("--method", choices=["direct", "nearest_sensor"], default="direct")
    sp.add_argument("--strategy", default="nonlocal,local,classical",
                    help="comma list of strategies for variance reporting")
    sp.add_argument("--resources", type=float, default=None, help="override scenario resource total")
    sp.add_argument("--repetitions", type=int, default=None)
    sp.add_argument("--out", help="also write the result record to this JSON file")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_estimate)

    for name, helptext in (
        ("gain-map", "precision gain of the entangled strategy over a target grid"),
        ("error-map", "interpolation residual against a known field over a target grid"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("scenario")
        sp.add_argument("--out", required=True, help="CSV output path")
        sp.add_argument("--grid", default="101", help="points per axis, e.g. 101 or 101,51")
        sp.add_argument("--bounds", default=None,
                        help="min,max per axis; defaults to the sensor bounding box")
        sp.add_argument("--plot", nargs="?", const="__auto__", default=None,
                        help="render a figure (default: CSV path with .png)")
        if name == "error-map":
            sp.add_argument("--field", required=True,
                            help="field spec JSON (inline or @file), e.g. "
                            '\'{"shift":[1,1],"terms":[[1,[3,0]],[1,[0,3]]]}\'')
            sp.set_defaults(func=_cmd_error_map)
        else:
            sp.set_defaults(func=_cmd_gain_map)

    sp = sub.add_parser("allocate", help="optimal resource split for a coefficient vector")
    sp.add_argument("--coeffs", required=True, help="comma-separated estimator coefficients")
    sp.add_argument("--resources", type=float, required=True, help="total resources N")
    sp.add_argument("--strategy", choices=["nonlocal", "local", "classical", "general"],
                    default="nonlocal")
    sp.add_argument("--p", type=float, default=None, help="variance exponent for --strategy general")
    sp.add_argument("--q", type=float, default=None, help="coefficient exponent for --strategy general")
    sp.add_argument("--repetitions", type=int, default=1)
    sp.add_argument("--round", action="store_true", help="largest-remainder integer rounding")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_allocate)

    sp = sub.add_parser("validate-mc", help="Monte Carlo check of the variance model")
    sp.add_argument("--coeffs", required=True)
    sp.add_argument("--alloc", required=True, help="comma-separated per-sensor resources")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--scaling", choices=["quantum", "classical"], default="quantum")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_validate_mc)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RankDeficiencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FieldSenseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
