"""Multi-index combinatorics: lower sets, their borders and covers.

A lower set (downward-closed set of exponent vectors) fixes which mixed
derivatives an expansion keeps; its border is the Pareto front of kept
orders and its cover indexes the leading truncation error.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DimensionMismatchError, SizeCapError

#: Ceiling on generated lower-set sizes; generators fail fast beyond it.
DEFAULT_SIZE_CAP = 1_000_000


def as_multiindex(alpha) -> tuple:
    """Normalize to a tuple of non-negative integers (a bare int means 1-D)."""
    if isinstance(alpha, (int, np.integer)):
        alpha = (alpha,)
    alpha = tuple(alpha)
    out = []
    for a in alpha:
        ia = int(a)
        if ia != a or ia < 0:
            raise ValueError(f"multi-index entries must be non-negative integers, got {alpha!r}")
        out.append(ia)
    return tuple(out)


def grlex_key(alpha):
    """Graded-lex sort key: total degree first, then higher leading exponents first.

    Gives every lower set one canonical element order, so matrix columns and
    unit-vector positions are reproducible across runs.
    """
    return (sum(alpha), tuple(-a for a in alpha))


def componentwise_leq(alpha, beta) -> bool:
    """True when ``alpha`` is dominated by ``beta`` in the product order."""
    return all(a <= b for a, b in zip(alpha, beta))


def is_lower_set(indices) -> bool:
    """True iff the collection is non-empty and downward closed under the product order."""
    elems = {as_multiindex(a) for a in indices}
    if not elems:
        return False
    dims = {len(a) for a in elems}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed multi-index dimensions: {sorted(dims)}")
    # Checking single-step predecessors suffices: closure follows by induction.
    for a in elems:
        for j, aj in enumerate(a):
            if aj and a[:j] + (aj - 1,) + a[j + 1 :] not in elems:
                return False
    return True


@dataclass(frozen=True)
class LowerSet:
    """Downward-closed multi-index set stored in canonical graded-lex order."""

    dim: int
    elements: tuple = ()

    def __post_init__(self):
        elems = tuple(sorted({as_multiindex(a) for a in self.elements}, key=grlex_key))
        if not elems:
            raise ValueError("a lower set cannot be empty")
        for a in elems:
            if len(a) != self.dim:
                raise DimensionMismatchError(
                    f"element {a} has dimension {len(a)}, expected {self.dim}"
                )
        if not is_lower_set(elems):
            raise ValueError("element set is not downward closed")
        object.__setattr__(self, "elements", elems)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, alpha):
        try:
            return as_multiindex(alpha) in set(self.elements)
        except ValueError:
            return False

    def index(self, alpha) -> int:
        """Position of ``alpha`` in the canonical order."""
        alpha = as_multiindex(alpha)
        try:
            return self.elements.index(alpha)
        except ValueError:
            raise ValueError(f"{alpha} is not in the lower set") from None

    def max_degrees(self) -> tuple:
        return tuple(max(a[j] for a in self.elements) for j in range(self.dim))

    def to_json(self):
        return [list(a) for a in self.elements]

    @classmethod
    def from_json(cls, data) -> "LowerSet":
        if not data:
            raise ValueError("cannot build a lower set from an empty list")
        return cls(len(data[0]), tuple(tuple(a) for a in data))


def border(S: LowerSet) -> set:
    """Maximal elements of the lower set -- its Pareto front."""
    elems = S.elements
    return {
        a
        for a in elems
        if not any(b != a and componentwise_leq(a, b) for b in elems)
    }


def cover(S: LowerSet) -> set:
    """Multi-indices one step above the set: each exceeds some element by one
    unit along one axis and lies outside the set.

    These orders index the leading truncation error of an expansion built on
    ``S``.  Unlike the border, not every cover element can be appended while
    keeping the set downward closed.
    """
    elems = set(S.elements)
    out = set()
    for a in elems:
        for j in range(S.dim):
            up = a[:j] + (a[j] + 1,) + a[j + 1 :]
            if up not in elems:
                out.add(up)
    return out


def _check_generator_args(m: int, k: int):
    if m < 1:
        raise ValueError(f"dimension must be >= 1, got {m}")
    if k < 0:
        raise ValueError(f"max degree must be >= 0, got {k}")


def box_lower_set(m: int, k: int, size_cap: int = DEFAULT_SIZE_CAP) -> LowerSet:
    """All multi-indices with every entry at most ``k``; size (k+1)^m."""
    _check_generator_args(m, k)
    size = (k + 1) ** m
    if size > size_cap:
        raise SizeCapError(f"box lower set would have {size} elements (cap {size_cap})")
    return LowerSet(m, tuple(itertools.product(range(k + 1), repeat=m)))


def _simplex_indices(m: int, k: int):
    if m == 1:
        for a in range(k + 1):
            yield (a,)
        return
    for a in range(k + 1):
        for rest in _simplex_indices(m - 1, k - a):
            yield (a,) + rest


def simplex_lower_set(m: int, k: int, size_cap: int = DEFAULT_SIZE_CAP) -> LowerSet:
    """All multi-indices with total degree at most ``k``; size C(m+k, m)."""
    _check_generator_args(m, k)
    size = comb(m + k, m)
    if size > size_cap:
        raise SizeCapError(f"simplex lower set would have {size} elements (cap {size_cap})")
    return LowerSet(m, tuple(_simplex_indices(m, k)))
