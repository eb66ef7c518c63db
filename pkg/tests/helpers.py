"""Shared generators for the randomized suites."""

import numpy as np

from fieldsense.multiindex import LowerSet, is_lower_set


def random_lower_set(rng, dim, max_size) -> LowerSet:
    """Grow a random lower set from the origin by admissible one-step additions."""
    elems = {(0,) * dim}
    target = int(rng.integers(1, max_size + 1))
    while len(elems) < target:
        candidates = set()
        for a in elems:
            for j in range(dim):
                up = a[:j] + (a[j] + 1,) + a[j + 1 :]
                if up in elems:
                    continue
                preds_ok = all(
                    up[:i] + (up[i] - 1,) + up[i + 1 :] in elems
                    for i in range(dim)
                    if up[i] > 0
                )
                if preds_ok:
                    candidates.add(up)
        if not candidates:
            break
        pick = sorted(candidates)[int(rng.integers(0, len(candidates)))]
        elems.add(pick)
    assert is_lower_set(elems)
    return LowerSet(dim, tuple(elems))


def monotone_axis_values(rng, count, scale=1.0, offset=0.0):
    """Strictly increasing coordinate values for integer levels 0..count-1."""
    steps = 0.2 + rng.random(count)
    return offset + scale * np.cumsum(steps)


def deformed_placement(rng, L: LowerSet) -> np.ndarray:
    """Points obtained from a lower set by independent increasing axis maps,
    in shuffled row order."""
    maxdeg = L.max_degrees()
    axis_vals = [
        monotone_axis_values(rng, d + 1, scale=0.5 + rng.random(), offset=rng.normal())
        for d in maxdeg
    ]
    pts = np.array([[axis_vals[j][a[j]] for j in range(L.dim)] for a in L.elements])
    order = rng.permutation(len(pts))
    return pts[order]


def random_in_model_polynomial(rng, L: LowerSet):
    """(callable field, exact evaluator) with monomial support inside L."""
    coeffs = rng.normal(size=len(L))
    A = np.array(L.elements, dtype=float)

    def field(x):
        x = np.asarray(x, dtype=float)
        return float(coeffs @ np.prod(x ** A, axis=1))

    return coeffs, field
