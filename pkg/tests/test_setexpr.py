from fractions import Fraction as F

import pytest

from rankone.errors import ParseError, ValidationError
from rankone.measure import IntervalSet
from rankone.setexpr import (Base, Interval, Levels, Pool, Union, evaluate, parse_set_expr,
                             to_text)


def test_interval_node():
    assert parse_set_expr("interval(0,1/2)") == Interval(F(0), F(1, 2))


def test_union_node():
    node = parse_set_expr("union(levels(3, 0..3), pool(3))")
    assert node == Union(Levels(3, (0, 1, 2, 3)), Pool(3))


def test_levels_list():
    assert parse_set_expr("levels(2, [0,2])") == Levels(2, (0, 2))


def test_parse_errors_have_location():
    with pytest.raises(ParseError) as exc:
        parse_set_expr("union(base(2),\n  bogus(1))")
    assert exc.value.line == 2 and exc.value.column == 3
    with pytest.raises(ParseError):
        parse_set_expr("base(0)")
    with pytest.raises(ParseError):
        parse_set_expr("base(2) extra")


def test_round_trip_text():
    for text in ["complement(intersect(base(2),interval(1/9,1)))",
                 "difference(levels(3,[0,2,5]),pool(3))"]:
        assert to_text(parse_set_expr(text)) == text


def test_evaluate(chacon):
    assert evaluate(parse_set_expr("base(2)"), chacon) == IntervalSet([(0, F(2, 9))])
    assert evaluate(parse_set_expr("pool(2)"), chacon) == IntervalSet([(F(8, 9), 1)])
    got = evaluate(parse_set_expr("union(levels(2, 0..3), pool(2))"), chacon)
    assert got == IntervalSet.full()
    with pytest.raises(ValidationError):
        evaluate(parse_set_expr("levels(2, [4])"), chacon)
