"""Security / colluding set systems and their rate-relevant structure.

A pattern is ``K`` users plus two monotone set systems, each kept only as
the antichain of its maximal sets.  :func:`analyze` derives the implicit
and total security sets, ``a*``, the achieving pairs, ``Q`` and the case
that selects the rate formula and the key construction.
:func:`closure_oracle` recomputes the same quantities by brute force over
the full closures and exists to cross-check :func:`analyze`.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import TYPE_CHECKING, Iterable, Sequence

from . import sets
from .errors import PatternError, SizeLimitError

if TYPE_CHECKING:
    from .ratecalc import LpSolution

MAX_USERS = 64
ORACLE_MAX_USERS = 12


class Case(str, enum.Enum):
    FULL = "FULL"          # a* = K
    IF = "IF"              # a* <= K-1, a* = |S_bar|, |Q| = K
    OTHER_LT = "OTHER_LT"  # a* < |S_bar|
    OTHER_Q = "OTHER_Q"    # a* = |S_bar|, |Q| < K

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Pattern:
    K: int
    security_gens: tuple[int, ...]
    colluding_gens: tuple[int, ...]

    @property
    def universe(self) -> int:
        return sets.universe(self.K)

    @property
    def explicit_union(self) -> int:
        u = 0
        for s in self.security_gens:
            u |= s
        return u

    def pairs(self) -> Iterable[tuple[int, int]]:
        return product(self.security_gens, self.colluding_gens)

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "security": [list(sets.users(s)) for s in self.security_gens],
            "colluding": [list(sets.users(t)) for t in self.colluding_gens],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Pattern":
        try:
            K = obj["K"]
            security = obj["security"]
            colluding = obj.get("colluding", [])
        except (KeyError, TypeError) as exc:
            raise PatternError(f"malformed pattern object: {exc}", "REJECT_FORMAT") from exc
        return normalize_pattern(K, security, colluding)

    def __str__(self) -> str:
        sec = ", ".join(sets.fmt(s) for s in self.security_gens)
        col = ", ".join(sets.fmt(t) for t in self.colluding_gens)
        return f"Pattern(K={self.K}, security=[{sec}], colluding=[{col}])"


def load_pattern(path) -> Pattern:
    with open(path, encoding="utf-8") as fh:
        return Pattern.from_json(json.load(fh))


def save_pattern(p: Pattern, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(p.to_json(), fh, indent=2)
        fh.write("\n")


def maximal_antichain(masks: Iterable[int]) -> tuple[int, ...]:
    """Drop duplicates and every set strictly contained in another."""
    uniq = sorted(set(masks), key=sets.size, reverse=True)
    keep: list[int] = []
    for m in uniq:
        if not any(sets.is_subset(m, k) for k in keep):
            keep.append(m)
    return tuple(sorted(keep, key=sets.sort_key))


def _to_mask(K: int, members: Iterable[int]) -> int:
    m = 0
    for u in members:
        if isinstance(u, bool) or not isinstance(u, int):
            raise PatternError(f"user index {u!r} is not an integer", "REJECT_RANGE")
        if u < 1 or u > K:
            raise PatternError(f"user {u} outside 1..{K}", "REJECT_RANGE")
        m |= sets.singleton(u)
    return m


def normalize_pattern(
    K: int,
    security_raw: Sequence[Iterable[int]],
    colluding_raw: Sequence[Iterable[int]],
) -> Pattern:
    if isinstance(K, bool) or not isinstance(K, int) or K < 2:
        raise PatternError(f"K must be an integer >= 2, got {K!r}", "REJECT_RANGE")
    if K > MAX_USERS:
        raise PatternError(f"K={K} exceeds {MAX_USERS}", "REJECT_RANGE")
    sec = [_to_mask(K, s) for s in security_raw]
    col = [_to_mask(K, t) for t in colluding_raw]
    if not any(sec):
        raise PatternError("all security sets are empty", "REJECT_EMPTY_SECURITY")
    for t in col:
        if sets.size(t) > K - 2:
            raise PatternError(
                f"colluding set {sets.fmt(t)} has more than K-2={K - 2} users",
                "REJECT_LARGE_COALITION",
            )
    if not col:
        col = [sets.EMPTY]
    return Pattern(K, maximal_antichain(sec), maximal_antichain(col))


def closure_contains(system: Iterable[int], s: int) -> bool:
    return any(sets.is_subset(s, g) for g in system)


def implicit_security_set(p: Pattern) -> int:
    """Users outside every explicit set whose complement some pair covers."""
    full = p.universe
    explicit = p.explicit_union
    out = 0
    for s, t in p.pairs():
        missing = full & ~(s | t)
        # missing == 0 means the pair covers [K]: every non-explicit user
        # can be trimmed out of it to leave exactly that user uncovered.
        if missing == 0:
            out |= full & ~explicit
        elif sets.size(missing) == 1 and not missing & explicit:
            out |= missing
    return out


@dataclass(frozen=True)
class RateAnalysis:
    K: int
    implicit_set: int
    total_set: int
    a_star: int
    achieving_pairs: tuple[tuple[int, int], ...]
    q_union: int
    case_label: Case
    lp_solution: "LpSolution | None" = None
    rate: Fraction | None = field(default=None)

    def summary(self) -> dict:
        return {
            "implicit_set": list(sets.users(self.implicit_set)),
            "total_set": list(sets.users(self.total_set)),
            "a_star": self.a_star,
            "q_union": list(sets.users(self.q_union)),
            "case": self.case_label.value,
            "achieving_pairs": [
                [list(sets.users(s)), list(sets.users(t))] for s, t in self.achieving_pairs
            ],
        }


def classify(K: int, a_star: int, total_size: int, q_size: int) -> Case:
    if a_star == K:
        return Case.FULL
    if a_star < total_size:
        return Case.OTHER_LT
    if q_size == K:
        return Case.IF
    return Case.OTHER_Q


def _finish(K, implicit, total, pair_iter) -> RateAnalysis:
    a_star = -1
    achieving: list[tuple[int, int]] = []
    for s, t in pair_iter:
        a = sets.size((s | t) & total)
        if a > a_star:
            a_star, achieving = a, [(s, t)]
        elif a == a_star:
            achieving.append((s, t))
    q = 0
    for s, t in achieving:
        q |= s | t
    achieving.sort(key=lambda st: (sets.sort_key(st[0]), sets.sort_key(st[1])))
    case = classify(K, a_star, sets.size(total), sets.size(q))
    return RateAnalysis(K, implicit, total, a_star, tuple(achieving), q, case)


def analyze(p: Pattern) -> RateAnalysis:
    implicit = implicit_security_set(p)
    total = p.explicit_union | implicit
    return _finish(p.K, implicit, total, p.pairs())


def closure(system: Iterable[int]) -> set[int]:
    out: set[int] = set()
    for g in system:
        out.update(sets.submasks(g))
    return out


def closure_oracle(p: Pattern) -> RateAnalysis:
    """Brute-force twin of :func:`analyze` over the materialized closures.

    Achieving pairs are reported as the maximal elements (componentwise
    inclusion) of the achieving closure pairs, which is the generator-level
    list :func:`analyze` produces.
    """
    if p.K > ORACLE_MAX_USERS:
        raise SizeLimitError(f"closure oracle limited to K <= {ORACLE_MAX_USERS}")
    K = p.K
    full = sets.universe(K)
    sec = closure(p.security_gens)
    col = closure(p.colluding_gens)
    explicit = 0
    for s in sec:
        explicit |= s

    implicit = 0
    for s in sec:
        for t in col:
            if sets.size(s | t) == K - 1:
                implicit |= full & ~(s | t)
    implicit &= ~explicit
    total = explicit | implicit

    a_star = max(sets.size((s | t) & total) for s in sec for t in col)
    hits = [(s, t) for s in sec for t in col if sets.size((s | t) & total) == a_star]
    q = 0
    for s, t in hits:
        q |= s | t
    maximal = [
        (s, t)
        for s, t in hits
        if not any(
            (s2, t2) != (s, t) and sets.is_subset(s, s2) and sets.is_subset(t, t2)
            for s2, t2 in hits
        )
    ]
    maximal.sort(key=lambda st: (sets.sort_key(st[0]), sets.sort_key(st[1])))
    case = classify(K, a_star, sets.size(total), sets.size(q))
    return RateAnalysis(K, implicit, total, a_star, tuple(maximal), q, case)


def symmetric_pattern(K: int, s_max: int, t_max: int) -> Pattern:
    """All sets of at most ``s_max`` secure users / ``t_max`` colluders."""
    from itertools import combinations

    t_max = min(t_max, K - 2)
    users = range(1, K + 1)
    sec = [c for c in combinations(users, min(s_max, K))]
    col = [c for c in combinations(users, t_max)] if t_max > 0 else [()]
    return normalize_pattern(K, sec, col)


def random_pattern(rng: random.Random, K: int, n_sec: int | None = None,
                   n_col: int | None = None) -> Pattern:
    """Random valid pattern; used by fuzz tests."""
    n_sec = n_sec if n_sec is not None else rng.randint(1, 3)
    n_col = n_col if n_col is not None else rng.randint(0, 4)
    sec = []
    for _ in range(n_sec):
        k = rng.randint(1, K)
        sec.append(rng.sample(range(1, K + 1), k))
    col = []
    for _ in range(n_col):
        k = rng.randint(0, K - 2)
        col.append(rng.sample(range(1, K + 1), k))
    return normalize_pattern(K, sec, col)
