import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from rankone.measure import (CertifiedValue, IntervalSet, distance, measure,
                             set_algebra, to_scalar)

from conftest import interval_sets


def iv(*pairs):
    return IntervalSet(pairs)


def test_intersect_overlap():
    assert set_algebra(iv((0, F(1, 2))), iv((F(1, 4), F(3, 4))), "intersect") == iv((F(1, 4), F(1, 2)))


def test_complement_of_empty():
    assert set_algebra(IntervalSet.empty(), IntervalSet.empty(), "complement") == IntervalSet.full()


def test_symdiff_remainders():
    got = set_algebra(iv((0, F(1, 2))), iv((F(1, 4), F(3, 4))), "symdiff")
    assert got == iv((0, F(1, 4)), (F(1, 2), F(3, 4)))


def test_measure_examples():
    assert measure(iv((0, F(2, 9)), (F(1, 3), F(1, 2)))) == F(7, 18)
    assert measure(IntervalSet.empty()) == 0
    assert measure(IntervalSet.full()) == 1


def test_distance_examples():
    half, mid = iv((0, F(1, 2))), iv((F(1, 4), F(3, 4)))
    assert distance(half, mid) == F(1, 2)
    assert distance(mid, mid) == 0
    assert distance(IntervalSet.empty(), IntervalSet.full()) == 1


def test_touching_intervals_merge():
    assert iv((0, F(1, 2)), (F(1, 2), 1)) == IntervalSet.full()
    assert len(iv((0, F(1, 3)), (F(1, 4), F(1, 2)))) == 1


def test_rejects_out_of_range_and_floats():
    with pytest.raises(ValueError):
        iv((0, F(3, 2)))
    with pytest.raises(TypeError):
        to_scalar(0.5)


def test_leftmost_slice():
    s = iv((0, F(1, 10)), (F(1, 2), F(3, 4)))
    assert s.leftmost(F(1, 5)) == iv((0, F(1, 10)), (F(1, 2), F(3, 5)))


def test_certified_value_invariant():
    with pytest.raises(ValueError):
        CertifiedValue(F(1, 2), F(1, 3))


@given(interval_sets(), interval_sets(), interval_sets())
def test_triangle_inequality(a, b, c):
    assert distance(a, c) <= distance(a, b) + distance(b, c)


@given(interval_sets(), interval_sets())
def test_inclusion_exclusion(a, b):
    assert measure(a | b) + measure(a & b) == measure(a) + measure(b)


@given(interval_sets(), interval_sets())
def test_de_morgan(a, b):
    assert (a | b).complement() == a.complement() & b.complement()
    assert (a & b).complement() == a.complement() | b.complement()


@given(interval_sets())
def test_complement_involution(a):
    assert a.complement().complement() == a


@given(interval_sets(), interval_sets())
def test_pointwise_semantics(a, b):
    for k in range(48):
        x = F(2 * k + 1, 96)
        pa, pb = a.contains_point(x), b.contains_point(x)
        assert (a | b).contains_point(x) == (pa or pb)
        assert (a & b).contains_point(x) == (pa and pb)
        assert (a - b).contains_point(x) == (pa and not pb)
        assert (a ^ b).contains_point(x) == (pa != pb)


@given(interval_sets())
def test_canonical_form(a):
    ivs = a.intervals
    assert all(x < y for x, y in ivs)
    assert all(ivs[i][1] < ivs[i + 1][0] for i in range(len(ivs) - 1))


@settings(max_examples=200)
@given(interval_sets())
def test_json_round_trip(a):
    text = a.to_json()
    assert IntervalSet.from_json(text) == a
    assert IntervalSet.from_json(text).to_json() == text


def test_json_format():
    assert json.loads(iv((0, F(1, 2)), (F(2, 3), 1)).to_json()) == [["0", "1/2"], ["2/3", "1"]]
