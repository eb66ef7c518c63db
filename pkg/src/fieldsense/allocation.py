"""Closed-form resource allocations, their variances, and a Monte Carlo check.

The shared optimization: minimize sum_j |a_j|^q / n_j^p over allocations n
with fixed total N.  The entangled (non-local) strategy and the per-sensor
(local) strategies are the (p, q) special cases; the precision gain is the
ratio of the two optimal variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_MC_TRIALS = 10_000


@dataclass(frozen=True)
class AllocationResult:
    """Per-sensor resources summing to the total, plus the optimal variance."""

    n: np.ndarray
    variance: float
    strategy: str
    repetitions: int = 1
    exponents: tuple | None = None  # (p, q) of the local objective, when one exists

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "n": [float(v) for v in self.n],
            "variance": float(self.variance),
            "repetitions": int(self.repetitions),
        }


@dataclass(frozen=True)
class RoundedAllocation:
    n: np.ndarray
    variance: float
    penalty: float  # relative variance increase over the continuous optimum

    def to_json(self) -> dict:
        return {
            "n": [int(v) for v in self.n],
            "variance": float(self.variance),
            "penalty": float(self.penalty),
        }


def pnorm(v, p: float) -> float:
    """(sum |v_i|^p)^(1/p); well-defined for every p > 0, a norm only for p >= 1."""
    if p <= 0:
        raise ValueError(f"exponent must be positive, got {p}")
    v = np.abs(np.asarray(v, dtype=float))
    top = float(v.max(initial=0.0))
    if top == 0.0:
        return 0.0
    # factor out the largest entry so small p cannot overflow
    return top * float(np.sum((v / top) ** p)) ** (1.0 / p)


def _check_alloc_args(a: np.ndarray, total: float):
    if not np.any(a):
        raise ValueError("coefficient vector must not be identically zero")
    if total <= 0:
        raise ValueError(f"total resources must be positive, got {total}")


def allocate_general(a, total: float, p: float, q: float, repetitions: int = 1) -> AllocationResult:
    """Minimizer of sum |a_j|^q / n_j^p subject to sum n_j = total.

    Stationarity makes |a_j|^q / n_j^(p+1) constant over the support, giving
    n_j proportional to |a_j|^(q/(p+1)); zero coefficients get zero resources.
    """
    a = np.asarray(a, dtype=float)
    _check_alloc_args(a, total)
    if p <= 0 or q <= 0:
        raise ValueError(f"exponents must be positive, got p={p}, q={q}")
    s = q / (p + 1.0)
    weights = np.zeros_like(a)
    support = a != 0
    weights[support] = np.abs(a[support]) ** s
    n = total * weights / weights.sum()
    variance = pnorm(a, s) ** q / total**p / repetitions
    return AllocationResult(n, variance, f"general(p={p:g},q={q:g})", repetitions, (p, q))


def nonlocal_allocation(c, total: float, repetitions: int = 1) -> AllocationResult:
    """Entangled strategy: resources follow |c| and the variance is |c|_1^2 / (m N^2)."""
    c = np.asarray(c, dtype=float)
    _check_alloc_args(c, total)
    l1 = pnorm(c, 1.0)
    n = total * np.abs(c) / l1
    variance = l1**2 / (repetitions * total**2)
    return AllocationResult(n, variance, "nonlocal_quantum", repetitions)


def local_allocation(c, total: float, repetitions: int = 1) -> AllocationResult:
    """Per-sensor quantum strategy: n_j ~ |c_j|^(2/3), variance |c|_{2/3}^2 / (m N^2)."""
    base = allocate_general(c, total, 2.0, 2.0, repetitions)
    return AllocationResult(base.n, base.variance, "local_quantum", repetitions, (2.0, 2.0))


def classical_allocation(c, total: float, repetitions: int = 1) -> AllocationResult:
    """Per-sensor classical strategy (shot-noise scaling): variance |c|_1^2 / (m N)."""
    base = allocate_general(c, total, 1.0, 2.0, repetitions)
    return AllocationResult(base.n, base.variance, "local_classical", repetitions, (1.0, 2.0))


def precision_gain(c) -> float:
    """Optimal local variance over optimal non-local variance: |c|_{2/3}^2 / |c|_1^2.

    Ranges from 1 (single supported sensor) to the support size (uniform |c|).
    """
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        raise ValueError("coefficient vector must not be identically zero")
    return pnorm(c, 2.0 / 3.0) ** 2 / pnorm(c, 1.0) ** 2


def stationarity_residual(a, n, p: float, q: float) -> float:
    """Relative spread of |a_j|^q / n_j^(p+1) over the support (0 at the optimum)."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    support = a != 0
    ratios = np.abs(a[support]) ** q / n[support] ** (p + 1.0)
    return float((ratios.max() - ratios.min()) / ratios.mean())


def monte_carlo_variance(c, n, trials: int, seed: int, scaling: str = "quantum") -> float:
    """Empirical variance of c . (F + eps) under independent per-sensor noise.

    Noise scale per sensor: 1/n_j (quantum) or 1/sqrt(n_j) (classical).  The
    field offsets cancel in the variance, so only the noise is simulated.
    Deterministic for a fixed seed.
    """
    c = np.asarray(c, dtype=float)
    n = np.asarray(n, dtype=float)
    if trials < MIN_MC_TRIALS:
        raise ValueError(f"need at least {MIN_MC_TRIALS} trials, got {trials}")
    if scaling not in ("quantum", "classical"):
        raise ValueError(f"scaling must be 'quantum' or 'classical', got {scaling!r}")
    support = c != 0
    if np.any(n[support] <= 0):
        raise ValueError("zero allocation on a supported coefficient")
    ns = n[support]
    sigma = 1.0 / ns if scaling == "quantum" else 1.0 / np.sqrt(ns)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((trials, int(support.sum()))) * sigma
    samples = noise @ c[support]
    return float(np.var(samples, ddof=1))


def analytic_variance(c, n, scaling: str = "quantum") -> float:
    """Error-propagation variance of c . F under the per-sensor noise model."""
    c = np.asarray(c, dtype=float)
    n = np.asarray(n, dtype=float)
    support = c != 0
    if np.any(n[support] <= 0):
        raise ValueError("zero allocation on a supported coefficient")
    power = 2.0 if scaling == "quantum" else 1.0
    return float(np.sum(c[support] ** 2 / n[support] ** power))


def round_allocation(result: AllocationResult, c) -> RoundedAllocation:
    """Largest-remainder integer rounding with the resulting variance penalty.

    Local objectives are re-evaluated on the integer allocation (infinite when
    rounding starves a supported sensor).  The non-local variance depends only
    on the total, so its penalty is zero as long as proportional weighting is
    kept inside each sensor.
    """
    c = np.asarray(c, dtype=float)
    total = int(round(float(result.n.sum())))
    floors = np.floor(result.n).astype(int)
    remainder = total - int(floors.sum())
    fractions = result.n - floors
    order = sorted(range(len(fractions)), key=lambda j: (-fractions[j], j))
    n_int = floors.copy()
    for j in order[:remainder]:
        n_int[j] += 1
    if result.exponents is None:
        variance = pnorm(c, 1.0) ** 2 / (result.repetitions * total**2)
    else:
        p, q = result.exponents
        support = c != 0
        if np.any(n_int[support] == 0):
            variance = float("inf")
        else:
            variance = float(
                np.sum(np.abs(c[support]) ** q / n_int[support].astype(float) ** p)
            ) / result.repetitions
    penalty = variance / result.variance - 1.0 if np.isfinite(variance) else float("inf")
    return RoundedAllocation(n_int, variance, penalty)
