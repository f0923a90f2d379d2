"""Exact security and converse checks for linear key schemes.

Every protocol variable is a linear image of the ambient uniform vector
``(w_1, ..., w_K, s)`` over F_p, so its entropy in symbols is the rank of its
coefficient matrix and conditional entropies are rank differences.  No
probability is ever enumerated on this path; :func:`bruteforce_mi_oracle`
does the enumeration independently for small fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from . import sets
from .errors import DimensionMismatch, SizeLimitError
from .gf import FMatrix, field_dtype, rank_array
from .pattern import Case, Pattern, RateAnalysis, closure
from .ratecalc import format_fraction
from .scheme import KeyScheme

logger = logging.getLogger(__name__)

ORACLE_ATOM_LIMIT = 1 << 24
CLOSURE_SWEEP_MAX_USERS = 5


@dataclass(frozen=True, eq=False)
class LinearObservable:
    label: str
    matrix: np.ndarray      # rows x ambient_dim, entries in [0, p)
    p: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


class Ambient:
    """Coordinates of ``(w_1..w_K, s)`` and the standard observables on them."""

    def __init__(self, scheme: KeyScheme):
        self.scheme = scheme
        self.K, self.L, self.D, self.p = scheme.K, scheme.L, scheme.source_dim, scheme.p
        self.n = self.K * self.L + self.D
        self._dtype = field_dtype(self.p)

    def _blank(self, rows: int) -> np.ndarray:
        return np.zeros((rows, self.n), dtype=self._dtype)

    def w(self, k: int) -> LinearObservable:
        M = self._blank(self.L)
        off = (k - 1) * self.L
        for i in range(self.L):
            M[i, off + i] = 1
        return LinearObservable(f"W{k}", M, self.p)

    def z(self, k: int) -> LinearObservable:
        C = self.scheme.coeff[k]
        M = self._blank(C.rows)
        if C.rows:
            M[:, self.K * self.L:] = np.array(C.tolist(), dtype=self._dtype)
        return LinearObservable(f"Z{k}", M, self.p)

    def x(self, k: int) -> LinearObservable:
        M = self.w(k).matrix.copy()
        Z = self.z(k).matrix
        if Z.shape[0]:
            M = (M + Z) % self.p
        return LinearObservable(f"X{k}", M, self.p)

    def wsum(self) -> LinearObservable:
        M = self._blank(self.L)
        for k in range(self.K):
            for i in range(self.L):
                M[i, k * self.L + i] = 1
        return LinearObservable("sumW", M, self.p)

    def zsigma(self) -> LinearObservable:
        M = self._blank(self.D)
        for i in range(self.D):
            M[i, self.K * self.L + i] = 1
        return LinearObservable("Zsigma", M, self.p)

    def ws(self, mask: int) -> list[LinearObservable]:
        return [self.w(k) for k in sets.users(mask)]

    def zs(self, mask: int) -> list[LinearObservable]:
        return [self.z(k) for k in sets.users(mask)]

    def xs(self, mask: int) -> list[LinearObservable]:
        return [self.x(k) for k in sets.users(mask)]


def _stack(obs: Sequence[LinearObservable], n: int, p: int) -> np.ndarray:
    mats = [o.matrix for o in obs if o.matrix.shape[0]]
    if not mats:
        return np.zeros((0, n), dtype=field_dtype(p))
    return np.vstack(mats)


def linear_entropy(obs: Sequence[LinearObservable],
                   given: Sequence[LinearObservable] = ()) -> Fraction:
    """``H(obs | given)`` in symbols: rank(obs, given) - rank(given)."""
    everything = list(obs) + list(given)
    if not everything:
        return Fraction(0)
    n, p = everything[0].dim, everything[0].p
    for o in everything:
        if o.dim != n or o.p != p:
            raise DimensionMismatch(f"observable {o.label} lives in a different ambient space")
    joint = rank_array(_stack(everything, n, p), p)
    cond = rank_array(_stack(list(given), n, p), p)
    return Fraction(joint - cond)


def security_mi(scheme: KeyScheme, S: int, T: int, amb: Ambient | None = None) -> Fraction:
    """``I(W_S ; X_[K] | sum W, (W_k, Z_k)_{k in T})`` in symbols."""
    amb = amb or Ambient(scheme)
    if S == 0:
        return Fraction(0)
    given = [amb.wsum()] + amb.ws(T) + amb.zs(T)
    msgs = amb.xs(sets.universe(scheme.K))
    return linear_entropy(msgs, given) - linear_entropy(msgs, given + amb.ws(S))


# -- report ----------------------------------------------------------------


@dataclass(frozen=True)
class AuditItem:
    check: str
    subject: str
    value: Fraction
    bound: Fraction
    relation: str      # "==" or ">="
    ok: bool

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "subject": self.subject,
            "value": format_fraction(self.value),
            "bound": format_fraction(self.bound),
            "relation": self.relation,
            "ok": self.ok,
        }


@dataclass
class AuditReport:
    scheme_hash: str
    case_label: str
    items: list[AuditItem] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    oracle: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(i.ok for i in self.items) and all(o.get("ok", True) for o in self.oracle)

    def failures(self) -> list[AuditItem]:
        return [i for i in self.items if not i.ok]

    def by_check(self, check: str) -> list[AuditItem]:
        return [i for i in self.items if i.check == check]

    def add(self, check: str, subject: str, value: Fraction, bound: Fraction,
            relation: str) -> AuditItem:
        ok = value == bound if relation == "==" else value >= bound
        item = AuditItem(check, subject, Fraction(value), Fraction(bound), relation, ok)
        self.items.append(item)
        return item

    def to_json(self) -> dict:
        return {
            "scheme_hash": self.scheme_hash,
            "case": self.case_label,
            "pass": self.passed,
            "items": [i.to_json() for i in self.items],
            "oracle": self.oracle,
            "notes": self.notes,
        }


def _pair_label(S: int, T: int) -> str:
    return f"S={sets.fmt(S)} T={sets.fmt(T)}"


def _lemma_pair(S: int, T: int, K: int) -> tuple[int, int] | None:
    """Disjoint pair with union of at most K-1 users, or None if S empties out."""
    T = T & ~S
    if sets.size(S | T) == K:
        drop = S if sets.size(S) >= 2 else T
        top = sets.users(drop)[-1]
        if drop == S:
            S &= ~sets.singleton(top)
        else:
            T &= ~sets.singleton(top)
    if S == 0:
        return None
    return S, T


def converse_audit(scheme: KeyScheme, pattern: Pattern, analysis: RateAnalysis,
                   closure_sweep: bool | None = None) -> AuditReport:
    """Correctness, per-pair security, converse entropy bounds and rate tightness.

    Check names: ``lemma1`` message size per user, ``lemma2`` keys outside
    the pair, ``lemma3`` / ``lemma4`` keys of the explicit / total security
    users inside the pair, ``lemma4_tight`` the same bound met with equality
    on achieving pairs, ``lemma6`` rank of the secret users' keys given the
    coalition's.  Pairs are trimmed to be disjoint with at most ``K-1``
    users, which stays inside both closures.
    """
    K, L = scheme.K, scheme.L
    amb = Ambient(scheme)
    rep = AuditReport(scheme.hash, scheme.case_label.value)
    full = sets.universe(K)
    Lf = Fraction(L)

    # zero-sum: the messages sum to the input sum as linear maps
    xsum = sum((amb.x(k).matrix for k in range(1, K + 1)), start=np.zeros_like(amb.wsum().matrix))
    rep.add("correctness", "sum X = sum W",
            Fraction(int(not np.array_equal(xsum % scheme.p, amb.wsum().matrix))), Fraction(0), "==")
    for k in range(1, K + 1):
        rep.add("message_length", f"user {k}", Fraction(amb.x(k).matrix.shape[0]), Lf, "==")

    for S, T in pattern.pairs():
        label = _pair_label(S, T)
        rep.add("security_mi", label, security_mi(scheme, S, T, amb), Fraction(0), "==")
        if (S | T) != full:
            val = linear_entropy(amb.zs(S & ~T), amb.zs(T))
            rep.add("lemma6", label, val, sets.size(S & ~T) * Lf, "==")

    if closure_sweep is None:
        closure_sweep = K <= CLOSURE_SWEEP_MAX_USERS
    if closure_sweep:
        bad = closure_security_sweep(scheme, pattern, amb)
        rep.add("security_closure", "all closure pairs", Fraction(len(bad)), Fraction(0), "==")

    # each message carries L fresh symbols given everyone else
    for u in range(1, K + 1):
        others = full & ~sets.singleton(u)
        val = linear_entropy([amb.x(u)], amb.ws(others) + amb.zs(others))
        rep.add("lemma1", f"user {u}", val, Lf, ">=")

    explicit = pattern.explicit_union
    total = analysis.total_set
    achieving = set(analysis.achieving_pairs)
    for S0, T0 in pattern.pairs():
        trimmed = _lemma_pair(S0, T0, K)
        if trimmed is None:
            continue
        S, T = trimmed
        label = _pair_label(S, T)
        rest = full & ~(S | T)
        rep.add("lemma2", label, linear_entropy(amb.zs(rest), amb.zs(T)), Lf, ">=")
        inter = (S | T) & explicit
        rep.add("lemma3", label, linear_entropy(amb.zs(inter), amb.zs(T & ~explicit)),
                sets.size(inter) * Lf, ">=")
        inter = (S | T) & total
        val = linear_entropy(amb.zs(inter), amb.zs(T & ~total))
        bound = sets.size(inter) * Lf
        rep.add("lemma4", label, val, bound, ">=")
        if (S0, T0) in achieving and sets.size(inter) == min(analysis.a_star, K - 1):
            rep.add("lemma4_tight", label, val, bound, "==")

    h_source = linear_entropy([amb.zsigma()])
    rep.add("rate_tight", "H(Zsigma)/L", h_source / L, scheme.rate, "==")
    if scheme.case_label is Case.FULL:
        rep.notes.append("lemma6 skipped for pairs covering every user")
    if scheme.generic_restricted:
        rep.notes.append("generic-position check was restricted to pair-induced subsets")
    return rep


def closure_security_sweep(scheme: KeyScheme, pattern: Pattern,
                           amb: Ambient | None = None) -> list[tuple[int, int]]:
    """Closure pairs (S, T) with nonzero leakage; empty for a secure scheme."""
    amb = amb or Ambient(scheme)
    sec = [s for s in closure(pattern.security_gens) if s]
    col = closure(pattern.colluding_gens)
    bad = []
    for S, T in product(sorted(sec), sorted(col)):
        if security_mi(scheme, S, T, amb) != 0:
            bad.append((S, T))
    return bad


# -- brute-force oracle ----------------------------------------------------


ORACLE_CHUNK = 1 << 17


def _group_keys(values: np.ndarray, p: int) -> list[np.ndarray]:
    """Pack rows of ``values`` (entries in [0, p)) into int64 digit groups."""
    n_atoms, width = values.shape
    if width == 0:
        return [np.zeros(n_atoms, dtype=np.int64)]
    per = 1
    while p ** (per + 1) < (1 << 62):
        per += 1
    keys = []
    for start in range(0, width, per):
        chunk = values[:, start:start + per]
        weights = np.array([p ** j for j in range(chunk.shape[1])], dtype=np.int64)
        keys.append(chunk @ weights)
    return keys


def _ids(groups: list[list[np.ndarray]]) -> np.ndarray:
    """Exact dense ids from per-chunk digit groups."""
    cols = [np.concatenate([g[j] for g in groups]) for j in range(len(groups[0]))]
    if len(cols) == 1:
        return np.unique(cols[0], return_inverse=True)[1].reshape(-1)
    return np.unique(np.stack(cols, axis=1), axis=0, return_inverse=True)[1].reshape(-1)


def _pair_ids(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.unique(a * (int(b.max()) + 1) + b, return_inverse=True)[1].reshape(-1)


def bruteforce_mi_oracle(scheme: KeyScheme, S: int, T: int,
                         limit: int = ORACLE_ATOM_LIMIT) -> Fraction:
    """Conditional-independence test by full enumeration of ``(w, s)``.

    Returns 0 iff ``W_S`` and the messages are independent given
    ``(sum W, (W_k, Z_k)_T)``, otherwise the positive rational
    ``sum |N(a,v,g) N(g) - N(a,g) N(v,g)| / N^2`` over observed triples.
    Keys are recomputed from the raw coefficients, not from the rank path.
    """
    K, L, D, p = scheme.K, scheme.L, scheme.source_dim, scheme.p
    n = K * L + D
    N = p ** n
    if N > limit:
        raise SizeLimitError(f"{p}^{n} = {N} atoms exceeds {limit}")
    if S == 0:
        return Fraction(0)
    coeff = {k: np.array(scheme.coeff[k].tolist(), dtype=np.int64).reshape(-1, D)
             for k in range(1, K + 1)}
    secret, coalition = sets.users(S), sets.users(T)
    a_parts, v_parts, g_parts = [], [], []
    for lo in range(0, N, ORACLE_CHUNK):
        idx = np.arange(lo, min(N, lo + ORACLE_CHUNK), dtype=np.int64)
        atoms = np.empty((idx.size, n), dtype=np.int64)
        for j in range(n):
            atoms[:, j] = idx % p
            idx //= p
        w = {k: atoms[:, (k - 1) * L:k * L] for k in range(1, K + 1)}
        s = atoms[:, K * L:]
        z = {k: (s @ C.T) % p for k, C in coeff.items()}
        x = [(w[k] + z[k]) % p if z[k].shape[1] else w[k] for k in range(1, K + 1)]
        wsum = sum(w.values()) % p
        a_parts.append(_group_keys(np.hstack([w[k] for k in secret]), p))
        v_parts.append(_group_keys(np.hstack(x), p))
        g = np.hstack([wsum] + [w[k] for k in coalition] + [z[k] for k in coalition])
        g_parts.append(_group_keys(g, p))

    a_id, v_id, g_id = _ids(a_parts), _ids(v_parts), _ids(g_parts)
    del a_parts, v_parts, g_parts
    ag = _pair_ids(a_id, g_id)
    vg = _pair_ids(v_id, g_id)
    avg = _pair_ids(ag, v_id)
    n_g, n_ag, n_vg, n_avg = (np.bincount(i) for i in (g_id, ag, vg, avg))
    _, first = np.unique(avg, return_index=True)
    lhs = n_avg[avg[first]] * n_g[g_id[first]]
    rhs = n_ag[ag[first]] * n_vg[vg[first]]
    gap = int(np.abs(lhs - rhs).sum())
    return Fraction(gap, N * N)


def oracle_feasible(scheme: KeyScheme, limit: int = ORACLE_ATOM_LIMIT) -> bool:
    return scheme.p ** (scheme.K * scheme.L + scheme.source_dim) <= limit


def planted_broken(pattern: Pattern, p: int, L: int = 1, source_dim: int = 1) -> KeyScheme:
    """All-zero keys: correct but leaks every input."""
    from .gf import FieldPlan

    coeff = {k: FMatrix.zeros(L, source_dim, p) for k in range(1, pattern.K + 1)}
    plan = FieldPlan(q=p, B=1, size_bound=0, p=p, surrogate=True)
    return KeyScheme(pattern, Case.FULL, plan, L, source_dim, coeff,
                     Fraction(source_dim, L), generic_ok=False)


def oracle_crosscheck(scheme: KeyScheme, pattern: Pattern,
                      pairs: Iterable[tuple[int, int]] | None = None,
                      limit: int = ORACLE_ATOM_LIMIT) -> list[dict]:
    """Compare rank-based and enumerated verdicts pair by pair."""
    amb = Ambient(scheme)
    out = []
    for S, T in (pairs if pairs is not None else pattern.pairs()):
        rank_mi = security_mi(scheme, S, T, amb)
        enum = bruteforce_mi_oracle(scheme, S, T, limit)
        out.append({
            "pair": [list(sets.users(S)), list(sets.users(T))],
            "rank_mi": format_fraction(rank_mi),
            "oracle": format_fraction(enum),
            "ok": (rank_mi == 0) == (enum == 0),
        })
    return out
