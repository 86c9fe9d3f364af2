from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from rankone.errors import ParseError, ValidationError
from rankone.scheme import (PRESETS, SchemeSpec, StageRule, compile_block_rule, normalize,
                            parse_scheme, serialize_scheme)
from rankone import Engine


def test_block_rule_chacon():
    spec = compile_block_rule("B B 1 B")
    assert spec.tail == StageRule(3, (0, 1, 0))
    assert spec == PRESETS["chacon3"]


def test_block_rule_pure_cutting():
    assert compile_block_rule("B B").tail == StageRule(2, (0, 0))


def test_block_rule_integers_attach_to_preceding_column():
    assert compile_block_rule("B 1 B 2 B 3 B").tail == StageRule(4, (1, 2, 3, 0))
    assert compile_block_rule("B B 2 3").tail == StageRule(2, (0, 5))


def test_block_rule_with_lhs():
    assert compile_block_rule("B' = B B 1 B") == PRESETS["chacon3"]


def test_block_rule_heights():
    eng = Engine(compile_block_rule("B B 1 B"))
    # oracle: k_{n+1} = 3 k_n + 1 from the block rule
    assert [eng.height(n) for n in range(1, 5)] == [1, 4, 13, 40]
    assert [len(eng.build_stage(n).levels) for n in range(1, 5)] == [1, 4, 13, 40]


def test_block_rule_errors():
    with pytest.raises(ValidationError):
        compile_block_rule("B 3")
    with pytest.raises(ParseError) as exc:
        compile_block_rule("B B\nB x")
    assert (exc.value.line, exc.value.column) == (2, 3)
    with pytest.raises(ParseError):
        compile_block_rule("2 B B")


def test_parse_preset():
    assert parse_scheme("chacon3") == PRESETS["chacon3"]
    assert parse_scheme("  staircase4 \n") is PRESETS["staircase4"]


def test_parse_explicit_prefix():
    spec = parse_scheme("prefix: cuts=2 spacers=[1,0]\ntail: cuts=3 spacers=[0,1,0]\n")
    assert len(spec.prefix) == 1
    assert spec.prefix[0] == StageRule(2, (1, 0))


def test_parse_block_line():
    assert parse_scheme("block: B B 1 B") == PRESETS["chacon3"]


def test_parse_validation():
    with pytest.raises(ValidationError):
        parse_scheme("cuts: 1")
    with pytest.raises(ValidationError):
        parse_scheme("tail: cuts=1 spacers=[0]")
    with pytest.raises(ValidationError):
        parse_scheme("tail: cuts=2 spacers=[0,-1]")
    with pytest.raises(ParseError) as exc:
        parse_scheme("tail: cuts=2 spacers=[0,0]\nfoo: 1")
    assert exc.value.line == 2


rules = st.integers(2, 5).flatmap(
    lambda r: st.lists(st.integers(0, 4), min_size=r, max_size=r).map(
        lambda s: StageRule(r, tuple(s))))
specs = st.builds(lambda p, t: SchemeSpec(tuple(p), t), st.lists(rules, max_size=4), rules)


@given(specs)
def test_round_trip(spec):
    assert parse_scheme(serialize_scheme(spec)) == spec


def test_preset_serializes_by_name():
    assert serialize_scheme(PRESETS["chacon3"]) == "chacon3\n"


def test_normalize_examples():
    assert normalize(PRESETS["chacon3"]) == (F(2, 3), F(1, 3))
    assert normalize(SchemeSpec((), StageRule(2, (0, 0)))) == (F(1), F(0))
    assert normalize(PRESETS["staircase4"]) == (F(1, 3), F(2, 3))


def _partial_sum_w1(spec, stages=200):
    # oracle: truncated series, w1 * (1 + sum_n S_n / prod r) = 1
    coeff, scale = F(0), F(1)
    for n in range(1, stages + 1):
        rule = spec.rule(n)
        scale /= rule.cuts
        coeff += rule.spacer_total * scale
    return coeff


@given(specs)
def test_normalize_matches_partial_sums(spec):
    w1, mass = normalize(spec)
    assert w1 + mass == 1
    coeff = _partial_sum_w1(spec, 60)
    assert 0 <= mass / w1 - coeff < F(1, 2**50)


@given(rules.filter(lambda r: r.spacer_total > 0))
def test_doubling_spacers_decreases_w1(rule):
    doubled = StageRule(rule.cuts, tuple(2 * s for s in rule.spacers))
    assert normalize(SchemeSpec((), doubled))[0] < normalize(SchemeSpec((), rule))[0]


def test_prefix_equal_to_tail_is_dropped():
    t = StageRule(4, (0, 1, 2, 3))
    assert SchemeSpec((t, t), t) == PRESETS["staircase4"]
