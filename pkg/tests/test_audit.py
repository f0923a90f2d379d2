from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weaksum import sets
from weaksum.audit import (Ambient, LinearObservable, bruteforce_mi_oracle, closure_security_sweep,
                           converse_audit, linear_entropy, oracle_crosscheck, planted_broken,
                           security_mi)
from weaksum.errors import DimensionMismatch, SizeLimitError
from weaksum.gf import FieldPlan, FMatrix, sample_uniform
from weaksum.pattern import Case, closure, normalize_pattern
from weaksum.ratecalc import optimal_rate
from weaksum.scheme import KeyScheme, synthesize

from _gen import ex1, ex2

m = sets.from_users


def build(p, seed=0, **kw):
    a, _ = optimal_rate(p)
    return synthesize(p, a, seed=seed, **kw), a


def full(K):
    return normalize_pattern(K, [list(range(1, K + 1))], [])


def test_entropy_basics():
    s, _ = build(full(3))
    amb = Ambient(s)
    first = LinearObservable("w1[0]", amb.w(1).matrix[:1], s.p)
    assert linear_entropy([first]) == 1
    assert linear_entropy([amb.z(2)], [amb.z(2)]) == 0
    assert linear_entropy(amb.zs(sets.universe(3))) == 2


def test_entropy_dimension_mismatch():
    a = Ambient(build(full(3))[0])
    b = Ambient(build(full(4))[0])
    with pytest.raises(DimensionMismatch):
        linear_entropy([a.w(1)], [b.w(1)])


def test_security_mi_examples():
    s, _ = build(ex2(), seed=7)
    assert security_mi(s, 0, m([2])) == 0
    assert security_mi(s, m([1]), m([2, 4])) == 0
    broken = planted_broken(full(3), 5)
    assert security_mi(broken, m([1]), 0) == broken.L


def test_full_k4_lemma1_tight():
    s, a = build(full(4))
    rep = converse_audit(s, full(4), a)
    lemma1 = rep.by_check("lemma1")
    assert len(lemma1) == 4 and all(i.value == i.bound == 1 for i in lemma1)
    assert rep.passed


def test_ex1_lemma4_tight():
    s, a = build(ex1())
    rep = converse_audit(s, ex1(), a)
    assert rep.passed
    tight = rep.by_check("lemma4_tight")
    assert tight and all(i.value == 4 for i in tight)
    amb = Ambient(s)
    assert linear_entropy(amb.zs(m([1, 2, 3, 4]))) == 4


def test_ex2_rate_tight_and_json():
    s, a = build(ex2(), seed=7)
    rep = converse_audit(s, ex2(), a)
    assert rep.passed
    assert linear_entropy([Ambient(s).zsigma()]) == 5
    (rt,) = rep.by_check("rate_tight")
    assert rt.value == Fraction(5, 2)
    js = rep.to_json()
    assert js["pass"] is True
    assert all("/" in item["value"] for item in js["items"])


def test_broken_scheme_fails_audit():
    p = full(3)
    a, _ = optimal_rate(p)
    rep = converse_audit(planted_broken(p, 5, source_dim=2), p, a)
    assert not rep.passed
    assert any(i.check == "security_mi" for i in rep.failures())


def test_oracle_examples():
    s, _ = build(full(3), prime=2)
    assert bruteforce_mi_oracle(s, m([1, 2, 3]), 0) == 0
    broken = planted_broken(full(3), 2)
    assert bruteforce_mi_oracle(broken, m([1]), 0) > 0
    big, _ = build(ex2())
    with pytest.raises(SizeLimitError):
        bruteforce_mi_oracle(big, m([1]), 0)


def random_tiny_scheme(rng: random.Random) -> KeyScheme:
    K = rng.randint(3, 4)
    L = rng.randint(1, 2)
    D = rng.randint(1, 3)
    p = 2 if K * L + D > 8 else rng.choice([2, 3])
    pattern = normalize_pattern(K, [[1]], [])
    coeff = {}
    for k in range(1, K):
        rows = rng.choice([0, L])
        coeff[k] = sample_uniform(rows, D, p, rng)
    acc = FMatrix.zeros(L, D, p)
    for C in coeff.values():
        if C.rows:
            acc = acc + C
    coeff[K] = -acc
    plan = FieldPlan(q=p, B=1, size_bound=0, p=p, surrogate=True)
    return KeyScheme(pattern, Case.OTHER_LT, plan, L, D, coeff, Fraction(D, L))


def test_oracle_agrees_on_random_tiny_schemes():
    rng = random.Random(99)
    verdicts = set()
    for _ in range(50):
        s = random_tiny_scheme(rng)
        S = rng.randint(1, (1 << s.K) - 1)
        T = rng.randint(0, (1 << s.K) - 1) & ~S
        rank = security_mi(s, S, T)
        enum = bruteforce_mi_oracle(s, S, T)
        assert (rank == 0) == (enum == 0)
        verdicts.add(rank == 0)
    assert verdicts == {True, False}


def test_closure_pairs_spot_checked_by_oracle():
    p = ex1()
    s, a = build(p, prime=3)
    assert closure_security_sweep(s, p) == []
    rng = random.Random(1)
    sec = sorted(x for x in closure(p.security_gens) if x)
    col = sorted(closure(p.colluding_gens))
    pairs = [(rng.choice(sec), rng.choice(col)) for _ in range(6)]
    assert all(r["ok"] and r["oracle"] == "0/1" for r in oracle_crosscheck(s, p, pairs))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rank_entropy_submodular_and_monotone(seed):
    rng = np.random.default_rng(seed)
    p, n = 5, 6
    A, B, C = (LinearObservable(lbl, rng.integers(0, p, size=(rng.integers(1, 4), n)), p)
               for lbl in "ABC")
    H = linear_entropy
    assert H([A, B]) >= H([A])
    assert H([A, C]) + H([B, C]) >= H([A, B, C]) + H([C])
    assert H([A], [B]) <= H([A])
