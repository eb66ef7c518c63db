"""Sensor placements and their integer relabelings onto lower sets.

A placement that can be relabeled axis-by-axis onto a lower set guarantees an
invertible evaluation matrix for the matching monomial family, so the search
here doubles as an invertibility certificate.  Placements the search cannot
certify are still usable: downstream code falls back to a numerical rank
check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DimensionMismatchError, DuplicatePointError, RelabelingError
from .multiindex import LowerSet, grlex_key, is_lower_set

#: Two coordinate values on one axis closer than this (relative) are the same value.
COORD_MERGE_RTOL = 1e-9

#: Ceiling on candidate axis orderings tried by the exhaustive search.
DEFAULT_SEARCH_CAP = 100_000


def _same_value(a: float, b: float) -> bool:
    return abs(a - b) <= COORD_MERGE_RTOL * max(abs(a), abs(b))


def _merge_axis(values: np.ndarray):
    """Cluster one axis' coordinates under the merge tolerance.

    Returns ascending cluster representatives and the per-point cluster id.
    """
    order = np.argsort(values, kind="stable")
    reps: list[float] = []
    assign = np.empty(len(values), dtype=int)
    for idx in order:
        v = float(values[idx])
        if reps and _same_value(v, reps[-1]):
            assign[idx] = len(reps) - 1
        else:
            reps.append(v)
            assign[idx] = len(reps) - 1
    return np.array(reps), assign


class PointSet:
    """Ordered, duplicate-free sensor locations in R^m."""

    def __init__(self, points, labels=None):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("points must form a non-empty p x m array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if labels is not None and len(labels) != pts.shape[0]:
            raise ValueError("one label per point expected")
        pts.setflags(write=False)
        self.points = pts
        self.labels = list(labels) if labels is not None else None
        self._clusters = tuple(_merge_axis(pts[:, j]) for j in range(pts.shape[1]))
        sigs = {tuple(int(self._clusters[j][1][i]) for j in range(pts.shape[1]))
                for i in range(pts.shape[0])}
        if len(sigs) != pts.shape[0]:
            raise DuplicatePointError("points must be distinct (after coordinate merging)")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.points[i]

    def __repr__(self):
        return f"PointSet({len(self)} points, dim={self.dim})"

    def axis_clusters(self, j: int):
        """(representatives, per-point cluster id) for axis ``j``."""
        return self._clusters[j]

    def to_json(self):
        return [list(map(float, row)) for row in self.points]

    @classmethod
    def from_json(cls, data, labels=None) -> "PointSet":
        return cls(data, labels=labels)


@dataclass(frozen=True)
class AxisMap:
    """Integer assignment for one axis.

    ``values[i]`` is the coordinate value mapped to index ``i``.  A collapsed
    axis sends every covered value to index 0 (the axis carries no expansion
    orders); ``values`` then lists the covered values for membership checks.
    """

    values: tuple
    collapsed: bool = False

    def index_of(self, v: float) -> int:
        for i, rep in enumerate(self.values):
            if _same_value(float(v), rep):
                return 0 if self.collapsed else i
        raise RelabelingError(f"coordinate value {v!r} is not covered by the axis map")

    def to_json(self):
        if self.collapsed:
            return {"collapsed": True, "values": list(self.values)}
        return {"map": [[float(v), i] for i, v in enumerate(self.values)]}

    @classmethod
    def from_json(cls, data) -> "AxisMap":
        if data.get("collapsed"):
            return cls(tuple(float(v) for v in data["values"]), collapsed=True)
        pairs = sorted(data["map"], key=lambda vi: vi[1])
        if [i for _, i in pairs] != list(range(len(pairs))):
            raise RelabelingError("axis map indices must be 0..n-1 with no repeats")
        return cls(tuple(float(v) for v, _ in pairs))


@dataclass(frozen=True)
class Relabeling:
    """Per-axis coordinate-to-integer maps (independent across axes)."""

    axes: tuple

    def apply(self, x) -> tuple:
        x = np.asarray(x, dtype=float)
        if x.shape != (len(self.axes),):
            raise DimensionMismatchError(
                f"point of dimension {x.shape} does not match {len(self.axes)} axis maps"
            )
        return tuple(amap.index_of(v) for amap, v in zip(self.axes, x))

    def to_json(self):
        return {"axes": [amap.to_json() for amap in self.axes]}

    @classmethod
    def from_json(cls, data) -> "Relabeling":
        return cls(tuple(AxisMap.from_json(a) for a in data["axes"]))


def relabel(X: PointSet, R: Relabeling) -> set:
    """Image of the placement under the coordinatewise integer relabeling."""
    if len(R.axes) != X.dim:
        raise DimensionMismatchError(
            f"relabeling has {len(R.axes)} axes, placement has dimension {X.dim}"
        )
    images = [R.apply(x) for x in X.points]
    out = set(images)
    if len(out) != len(images):
        raise RelabelingError("relabeling collapses distinct points onto one index vector")
    return out


def _axis_profile(X: PointSet, j: int):
    """(representatives, per-point cluster id, per-cluster multiplicity)."""
    reps, assign = X.axis_clusters(j)
    counts = np.bincount(assign, minlength=len(reps))
    return reps, assign, counts


def _greedy_order(reps: np.ndarray, counts: np.ndarray) -> list:
    """Cluster ids ordered by falling multiplicity, ties by ascending value."""
    return sorted(range(len(reps)), key=lambda c: (-int(counts[c]), float(reps[c])))


def _image_of(assigns, rank_maps, collapsed_mask):
    """Integer image of every point under per-axis rank maps."""
    n = len(assigns[0])
    cols = []
    for j, assign in enumerate(assigns):
        if collapsed_mask[j]:
            cols.append([0] * n)
        else:
            rank = rank_maps[j]
            cols.append([rank[c] for c in assign])
    return [tuple(col[i] for col in cols) for i in range(n)]


def _rank_map(order: list) -> dict:
    return {c: t for t, c in enumerate(order)}


def _grlex_list_key(elements):
    return tuple(grlex_key(a) for a in sorted(elements, key=grlex_key))


def _build_relabeling(X, orders, collapsed_mask) -> Relabeling:
    axes = []
    for j in range(X.dim):
        reps, _, _ = _axis_profile(X, j)
        if collapsed_mask[j]:
            axes.append(AxisMap(tuple(float(v) for v in reps), collapsed=True))
        else:
            axes.append(AxisMap(tuple(float(reps[c]) for c in orders[j])))
    return Relabeling(tuple(axes))


def _grouped_orderings(reps, counts):
    """All cluster orderings whose multiplicities are non-increasing.

    An image can only be a lower set when the count of points at index t does
    not grow with t, so only permutations inside equal-multiplicity groups
    matter.  Groups are emitted in (falling count, ascending value) order.
    """
    order = _greedy_order(reps, counts)
    groups = []
    for c in order:
        if groups and counts[groups[-1][0]] == counts[c]:
            groups[-1].append(c)
        else:
            groups.append([c])
    total = 1
    for g in groups:
        total *= factorial(len(g))
    def gen():
        for perm_parts in itertools.product(*(itertools.permutations(g) for g in groups)):
            yield [c for part in perm_parts for c in part]
    return gen, total


def find_lower_set_relabeling(X: PointSet, search_cap: int = DEFAULT_SEARCH_CAP):
    """Search for a relabeling of ``X`` onto a lower set.

    Greedy pass first: per axis, order values by falling multiplicity (ties by
    ascending coordinate).  On failure, enumerate the remaining candidate
    orderings, optionally collapsing axes, up to ``search_cap`` candidates, and
    return the graded-lex-minimal lower set found.  Returns ``None`` when the
    search exhausts without a hit; that is not a proof of non-equivalence.
    """
    m = X.dim
    profiles = [_axis_profile(X, j) for j in range(m)]
    assigns = [prof[1] for prof in profiles]

    greedy_orders = [_greedy_order(reps, counts) for reps, _, counts in profiles]
    image = _image_of(assigns, [_rank_map(o) for o in greedy_orders], [False] * m)
    if len(set(image)) == len(image) and is_lower_set(image):
        return (
            LowerSet(m, tuple(image)),
            _build_relabeling(X, greedy_orders, [False] * m),
        )

    best = None  # (grlex list key, elements, orders, mask)
    budget = search_cap
    for n_collapsed in range(m + 1):
        for collapsed in itertools.combinations(range(m), n_collapsed):
            mask = [j in collapsed for j in range(m)]
            if all(mask) and len(X) > 1:
                continue
            # Collapsed axes must leave the points distinguishable.
            sigs = {
                tuple(int(assigns[j][i]) for j in range(m) if not mask[j])
                for i in range(len(X))
            }
            if len(sigs) != len(X):
                continue
            gens, counts = [], []
            for j in range(m):
                if mask[j]:
                    gens.append(lambda: iter([None]))
                    counts.append(1)
                else:
                    gen, total = _grouped_orderings(profiles[j][0], profiles[j][2])
                    gens.append(gen)
                    counts.append(total)
            n_candidates = int(np.prod(counts, dtype=float))
            if n_candidates > budget:
                continue
            budget -= n_candidates
            for combo in itertools.product(*(g() for g in gens)):
                orders = [combo[j] if not mask[j] else None for j in range(m)]
                rank_maps = [_rank_map(o) if o is not None else None for o in orders]
                image = _image_of(assigns, rank_maps, mask)
                if len(set(image)) != len(image):
                    continue
                if not is_lower_set(image):
                    continue
                key = _grlex_list_key(image)
                if best is None or key < best[0]:
                    best = (key, tuple(set(image)), orders, list(mask))
    if best is None:
        return None
    _, elements, orders, mask = best
    return (LowerSet(m, elements), _build_relabeling(X, orders, mask))


def _slice_counts(L: LowerSet, j: int) -> np.ndarray:
    kmax = max(a[j] for a in L.elements)
    counts = np.zeros(kmax + 1, dtype=int)
    for a in L.elements:
        counts[a[j]] += 1
    return counts


def is_equivalent(X: PointSet, L: LowerSet, search_cap: int = DEFAULT_SEARCH_CAP) -> bool:
    """True iff some relabeling maps ``X`` onto exactly the elements of ``L``.

    A cardinality or dimension mismatch simply returns ``False``.
    """
    if len(X) != len(L) or X.dim != L.dim:
        return False
    m = X.dim
    target = set(L.elements)
    profiles = [_axis_profile(X, j) for j in range(m)]
    assigns = [prof[1] for prof in profiles]

    per_axis_choices = []  # per axis: list of (order or None-for-collapse)
    total = 1
    for j in range(m):
        reps, _, counts = profiles[j]
        slices = _slice_counts(L, j)
        choices = []
        if len(slices) == 1:
            # Axis carries no expansion orders; any number of distinct values
            # works via collapse (a single value is the injective special case).
            choices.append(None)
        elif len(reps) == len(slices) and sorted(counts) == sorted(slices.tolist()):
            # Values may only land on indices with the same multiplicity.
            by_count: dict = {}
            for c in range(len(reps)):
                by_count.setdefault(int(counts[c]), []).append(c)
            pos_by_count: dict = {}
            for t, s in enumerate(slices):
                pos_by_count.setdefault(int(s), []).append(t)
            group_iters = []
            feasible = True
            for cval, clusters in sorted(by_count.items()):
                positions = pos_by_count.get(cval, [])
                if len(positions) != len(clusters):
                    feasible = False
                    break
                group_iters.append((clusters, positions))
            if feasible:
                def axis_orders(groups=group_iters, n=len(slices)):
                    for perm_parts in itertools.product(
                        *(itertools.permutations(cl) for cl, _ in groups)
                    ):
                        order = [None] * n
                        for (clusters, positions), perm in zip(groups, perm_parts):
                            for pos, c in zip(positions, perm):
                                order[pos] = c
                        yield order
                nperm = 1
                for clusters, _ in group_iters:
                    nperm *= factorial(len(clusters))
                choices = ("gen", axis_orders, nperm)
        if not choices:
            return False
        per_axis_choices.append(choices)
        total *= choices[2] if isinstance(choices, tuple) else len(choices)
        if total > search_cap:
            raise RelabelingError(
                f"equivalence search space ({total} candidates) exceeds cap {search_cap}"
            )

    def expand(choice):
        if isinstance(choice, tuple):
            return choice[1]()
        return iter(choice)

    for combo in itertools.product(*map(list, map(expand, per_axis_choices))):
        mask = [o is None for o in combo]
        rank_maps = [None if o is None else _rank_map(o) for o in combo]
        image = _image_of(assigns, rank_maps, mask)
        if len(set(image)) == len(image) and set(image) == target:
            return True
    return False
