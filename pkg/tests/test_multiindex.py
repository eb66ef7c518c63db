import itertools

import numpy as np
import pytest

from fieldsense.errors import DimensionMismatchError, SizeCapError
from fieldsense.multiindex import (
    LowerSet,
    border,
    box_lower_set,
    cover,
    grlex_key,
    is_lower_set,
    simplex_lower_set,
)
from helpers import random_lower_set


# Definition-scan oracles over a bounding box, kept independent of the library.

def border_oracle(elements):
    elements = set(elements)
    return {
        a
        for a in elements
        if not any(b != a and all(x <= y for x, y in zip(a, b)) for b in elements)
    }


def cover_oracle(elements):
    elements = set(elements)
    dim = len(next(iter(elements)))
    box = [range(max(a[j] for a in elements) + 2) for j in range(dim)]
    out = set()
    for cand in itertools.product(*box):
        if cand in elements:
            continue
        covers_some = any(
            cand[j] > 0 and cand[:j] + (cand[j] - 1,) + cand[j + 1 :] in elements
            for j in range(dim)
        )
        if covers_some:
            out.add(cand)
    return out


def test_is_lower_set_examples():
    assert is_lower_set([(0, 0), (1, 0), (0, 1)])
    assert not is_lower_set([(1, 0)])
    assert not is_lower_set([])


def test_is_lower_set_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        is_lower_set([(0, 0), (1,)])


def test_border_examples():
    S = LowerSet(2, [(0, 0), (1, 0), (0, 1)])
    assert border(S) == {(1, 0), (0, 1)}
    assert border(LowerSet(1, [(0,)])) == {(0,)}
    assert border(box_lower_set(2, 4)) == {(4, 4)}


def test_cover_examples():
    S = LowerSet(2, [(0, 0), (1, 0), (0, 1)])
    assert cover(S) == {(2, 0), (1, 1), (0, 2)}
    assert cover(LowerSet(1, range(5))) == {(5,)}
    simplex = simplex_lower_set(2, 4)
    assert cover(simplex) == {(i, 5 - i) for i in range(6)}


def test_cover_staircase_includes_single_step_successors():
    # Staircase where some cover elements are not lower-set-preserving additions:
    # (4, 3) sits one step above (3, 3) but needs the absent (4, 2)'s successor chain.
    elems = [(i, j) for i in range(4) for j in range(4)]
    elems += [(0, 4), (1, 4), (4, 0), (4, 1)]
    S = LowerSet(2, elems)
    expected = {(0, 5), (1, 5), (2, 4), (3, 4), (4, 2), (4, 3), (5, 0), (5, 1)}
    assert cover(S) == expected
    assert border(S) == {(1, 4), (3, 3), (4, 1)}


def test_box_lower_set():
    assert len(box_lower_set(2, 2)) == 9
    assert box_lower_set(1, 4).elements == ((0,), (1,), (2,), (3,), (4,))
    assert len(box_lower_set(2, 4)) == 25


def test_simplex_lower_set():
    assert simplex_lower_set(2, 2).elements == (
        (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
    )
    assert simplex_lower_set(1, 3).elements == ((0,), (1,), (2,), (3,))
    assert len(simplex_lower_set(3, 1)) == 4


def test_generator_size_cap():
    with pytest.raises(SizeCapError):
        box_lower_set(4, 100)
    with pytest.raises(SizeCapError):
        simplex_lower_set(3, 1000)
    box_lower_set(2, 3, size_cap=16)
    with pytest.raises(SizeCapError):
        box_lower_set(2, 3, size_cap=15)


def test_generator_argument_validation():
    with pytest.raises(ValueError):
        box_lower_set(0, 2)
    with pytest.raises(ValueError):
        simplex_lower_set(2, -1)


def test_canonical_order_is_graded_lex():
    S = LowerSet(2, [(0, 1), (0, 0), (1, 1), (1, 0), (0, 2), (2, 0)])
    assert S.elements == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert S.index((1, 1)) == 4
    keys = [grlex_key(a) for a in S.elements]
    assert keys == sorted(keys)


def test_lower_set_validation():
    with pytest.raises(ValueError):
        LowerSet(2, [])
    with pytest.raises(ValueError):
        LowerSet(2, [(1, 0)])  # missing the origin
    with pytest.raises(DimensionMismatchError):
        LowerSet(2, [(0, 0), (1,)])
    with pytest.raises(ValueError):
        LowerSet(2, [(0, 0), (-1, 0)])


def test_json_round_trip():
    S = simplex_lower_set(3, 2)
    assert LowerSet.from_json(S.to_json()) == S


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_randomized_invariants(dim):
    rng = np.random.default_rng(1000 + dim)
    for _ in range(30):
        S = random_lower_set(rng, dim, 50)
        elems = set(S.elements)
        assert is_lower_set(S.elements)
        b = border(S)
        c = cover(S)
        assert b <= elems
        assert not (c & elems)
        assert b == border_oracle(elems)
        assert c == cover_oracle(elems)
        # removing any border element keeps the set lower (unless it empties it)
        for a in b:
            rest = elems - {a}
            if rest:
                assert is_lower_set(rest)
        # the admissible cover elements are exactly those whose predecessors exist
        for a in c:
            admissible = all(
                a[:j] + (a[j] - 1,) + a[j + 1 :] in elems
                for j in range(dim)
                if a[j] > 0
            )
            assert is_lower_set(elems | {a}) == admissible
