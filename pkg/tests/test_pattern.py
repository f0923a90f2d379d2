from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from weaksum import sets
from weaksum.errors import PatternError, SizeLimitError
from weaksum.pattern import (Case, Pattern, analyze, closure_contains, closure_oracle,
                             implicit_security_set, normalize_pattern, random_pattern,
                             symmetric_pattern)

from _gen import ex1, ex2

m = sets.from_users


def test_ex1_antichains():
    p = ex1()
    assert p.colluding_gens == (m([1, 3, 4]), m([2, 3, 5]))
    assert p.security_gens == (m([1]), m([2]), m([3]))


def test_duplicate_security_sets_collapse():
    p = normalize_pattern(3, [[1], [1]], [[2]])
    assert p.security_gens == (m([1]),)


def test_ex2_colluding_antichain():
    assert ex2().colluding_gens == (m([1, 3]), m([2, 4]), m([2, 5]))


@pytest.mark.parametrize("K,sec,col,reason", [
    (4, [[], []], [[1]], "REJECT_EMPTY_SECURITY"),
    (4, [[1]], [[1, 2, 3]], "REJECT_LARGE_COALITION"),
    (4, [[5]], [], "REJECT_RANGE"),
    (4, [[0]], [], "REJECT_RANGE"),
    (1, [[1]], [], "REJECT_RANGE"),
])
def test_rejections(K, sec, col, reason):
    with pytest.raises(PatternError) as info:
        normalize_pattern(K, sec, col)
    assert info.value.reason == reason


def test_closure_contains():
    assert closure_contains([m([1, 3, 4])], m([3, 4]))
    assert not closure_contains([m([1, 3, 4])], m([3, 5]))
    assert closure_contains([m([1])], 0)


def test_implicit_sets():
    assert implicit_security_set(ex1()) == m([4, 5])
    assert implicit_security_set(ex2()) == 0
    assert implicit_security_set(normalize_pattern(2, [[1]], [[]])) == m([2])


def test_ex1_analysis():
    a = analyze(ex1())
    assert a.total_set == m([1, 2, 3, 4, 5])
    assert a.a_star == 4
    assert a.q_union == m([1, 2, 3, 4, 5])
    assert a.case_label is Case.OTHER_LT


def test_ex2_analysis():
    a = analyze(ex2())
    assert a.total_set == m([1, 2])
    assert a.a_star == 2
    assert a.q_union == sets.universe(5)
    assert a.case_label is Case.IF


def test_symmetric_never_if():
    a = analyze(symmetric_pattern(4, 2, 1))
    assert a.total_set == sets.universe(4)
    assert a.a_star == 3
    assert a.case_label in (Case.OTHER_LT, Case.OTHER_Q)


@pytest.mark.parametrize("p", [ex1(), ex2(), normalize_pattern(2, [[1]], [[]])])
def test_oracle_matches_examples(p):
    assert closure_oracle(p) == analyze(p)


def test_oracle_two_users():
    a = closure_oracle(normalize_pattern(2, [[1]], [[]]))
    assert a.total_set == m([1, 2]) and a.a_star == 1


def test_oracle_size_limit():
    with pytest.raises(SizeLimitError):
        closure_oracle(symmetric_pattern(13, 1, 1))


def test_json_roundtrip():
    p = ex1()
    assert Pattern.from_json(p.to_json()) == p


@st.composite
def patterns(draw, k_max=7):
    K = draw(st.integers(2, k_max))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_pattern(random.Random(seed), K)


@settings(max_examples=150, deadline=None)
@given(patterns())
def test_analyze_matches_closure_oracle(p):
    assert analyze(p) == closure_oracle(p)


@settings(max_examples=150, deadline=None)
@given(patterns())
def test_structural_invariants(p):
    a = analyze(p)
    assert a.implicit_set & p.explicit_union == 0
    assert a.a_star <= sets.size(a.total_set) <= p.K
    assert (a.case_label is Case.FULL) == (a.a_star == p.K)
    if a.a_star == sets.size(a.total_set):
        assert sets.is_subset(a.total_set, a.q_union)


@settings(max_examples=100, deadline=None)
@given(patterns(), st.integers(0, 2**32 - 1))
def test_extra_colluder_never_lowers_a_star(p, seed):
    rng = random.Random(seed)
    extra = rng.sample(range(1, p.K + 1), rng.randint(0, p.K - 2))
    sec = [sets.users(s) for s in p.security_gens]
    col = [sets.users(t) for t in p.colluding_gens] + [extra]
    bigger = normalize_pattern(p.K, sec, col)
    assert analyze(bigger).a_star >= analyze(p).a_star
