"""Linear zero-sum key schemes for each rate case.

Every user key is ``Z_k = C_k @ s`` for a uniform source key ``s`` of
``source_dim`` field symbols.  The coefficient blocks ``C_k`` always sum to
zero, so ``sum_k (W_k + Z_k) = sum_k W_k``.  Which users get keys, and how
large they are, depends on the case:

* FULL      unit vectors for users ``1..K-1`` and their negated sum for ``K``
* OTHER_LT  random rows for the total security set, last one closes the sum
* OTHER_Q   random rows for the total security set, one helper user outside
            ``Q`` closes the sum
* IF        ``q_bar``-row blocks: ``F_k @ G_k`` of rank ``p_k`` outside the
            total security set, full-rank ``H_k`` inside it

Random blocks are resampled until the generic-position predicate holds.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations

from . import sets
from .errors import DimensionMismatch, MissingLpError, RetryExhausted
from .gf import (FieldPlan, FMatrix, derive_seed, field_rank, make_rng, plan_field,
                 sample_uniform, surrogate_plan, vstack)
from .pattern import Case, Pattern, RateAnalysis
from .ratecalc import LpSolution, format_fraction

logger = logging.getLogger(__name__)

RETRY_BUDGET = 64
MAX_BLOCK_SUBSETS = 1 << 20


@dataclass(frozen=True, eq=False)
class KeyScheme:
    pattern: Pattern
    case_label: Case
    field_plan: FieldPlan
    L: int
    source_dim: int
    coeff: dict[int, FMatrix]          # user -> C_k, shape (key_len, source_dim)
    rate: Fraction
    helper_u: int | None = None
    lp_echo: dict | None = None        # {"numerators": {k: p_k}, "q_bar": q_bar}
    seed: int = 0
    retry_count: int = 0
    generic_ok: bool = True
    generic_restricted: bool = False

    @property
    def K(self) -> int:
        return self.pattern.K

    @property
    def p(self) -> int:
        return self.field_plan.p

    def key_len(self, k: int) -> int:
        return self.coeff[k].rows

    def to_json(self) -> dict:
        body = {
            "pattern": self.pattern.to_json(),
            "case_label": self.case_label.value,
            "field_plan": self.field_plan.to_json(),
            "L": self.L,
            "source_dim": self.source_dim,
            "rate": format_fraction(self.rate),
            "coeff": {str(k): m.to_json() for k, m in sorted(self.coeff.items())},
            "helper_u": self.helper_u,
            "lp_echo": self.lp_echo,
            "seed": self.seed,
            "retry_count": self.retry_count,
            "generic_ok": self.generic_ok,
            "generic_restricted": self.generic_restricted,
        }
        body["hash"] = content_hash(body)
        return body

    @classmethod
    def from_json(cls, obj: dict) -> "KeyScheme":
        expected = content_hash({k: v for k, v in obj.items() if k != "hash"})
        if obj.get("hash") not in (None, expected):
            raise ValueError("scheme file content hash mismatch")
        lp_echo = obj.get("lp_echo")
        if lp_echo is not None:
            lp_echo = {"numerators": {int(k): v for k, v in lp_echo["numerators"].items()},
                       "q_bar": lp_echo["q_bar"]}
        return cls(
            pattern=Pattern.from_json(obj["pattern"]),
            case_label=Case(obj["case_label"]),
            field_plan=FieldPlan.from_json(obj["field_plan"]),
            L=obj["L"],
            source_dim=obj["source_dim"],
            coeff={int(k): FMatrix.from_json(m) for k, m in obj["coeff"].items()},
            rate=Fraction(obj["rate"]),
            helper_u=obj.get("helper_u"),
            lp_echo=lp_echo,
            seed=obj.get("seed", 0),
            retry_count=obj.get("retry_count", 0),
            generic_ok=obj.get("generic_ok", True),
            generic_restricted=obj.get("generic_restricted", False),
        )

    @property
    def hash(self) -> str:
        return self.to_json()["hash"]


def content_hash(body: dict) -> str:
    blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_scheme(scheme: KeyScheme, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scheme.to_json(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_scheme(path) -> KeyScheme:
    with open(path, encoding="utf-8") as fh:
        return KeyScheme.from_json(json.load(fh))


# -- constructions ---------------------------------------------------------


def _negsum(blocks, rows: int, cols: int, p: int) -> FMatrix:
    acc = FMatrix.zeros(rows, cols, p)
    for b in blocks:
        acc = acc + b
    return -acc


def _full(K: int, p: int, rng) -> tuple[dict[int, FMatrix], dict]:
    D = K - 1
    coeff = {}
    for k in range(1, K):
        coeff[k] = FMatrix(1, D, p, tuple(int(j == k - 1) for j in range(D)))
    coeff[K] = _negsum(coeff.values(), 1, D, p)
    return coeff, {"L": 1, "source_dim": D}


def _scalar_keys(K: int, keyed_random: tuple[int, ...], closer: int, D: int, p: int,
                 rng) -> dict[int, FMatrix]:
    coeff = {k: FMatrix.zeros(0, D, p) for k in range(1, K + 1)}
    for k in keyed_random:
        coeff[k] = sample_uniform(1, D, p, rng)
    coeff[closer] = _negsum([coeff[k] for k in keyed_random], 1, D, p)
    return coeff


def _if_case(K: int, analysis: RateAnalysis, lp: LpSolution, p: int, rng):
    q_bar = lp.common_denominator
    nums = lp.numerators
    a = analysis.a_star
    D = lp.p_bar + (a - 1) * q_bar
    inside = sets.users(analysis.total_set)
    last = inside[-1]
    coeff: dict[int, FMatrix] = {}
    for k in range(1, K + 1):
        if k in nums:
            F = sample_uniform(q_bar, nums[k], p, rng)
            G = sample_uniform(nums[k], D, p, rng)
            coeff[k] = F @ G
        elif k != last:
            coeff[k] = sample_uniform(q_bar, D, p, rng)
    coeff[last] = _negsum(coeff.values(), q_bar, D, p)
    return coeff, {"L": q_bar, "source_dim": D}


def synthesize(p: Pattern, analysis: RateAnalysis, lp: LpSolution | None = None,
               seed: int = 0, *, q: int = 2, prime: int | None = None,
               require_generic: bool = True, retries: int = RETRY_BUDGET) -> KeyScheme:
    """Build the key scheme for ``analysis.case_label``.

    ``prime`` forces a (usually small) surrogate modulus instead of the
    planned one; generic position may then be unattainable, which surfaces
    as :class:`RetryExhausted` unless ``require_generic`` is false.
    """
    case = analysis.case_label
    if case is Case.IF:
        lp = lp or analysis.lp_solution
        if lp is None:
            raise MissingLpError("IF-case synthesis needs the LP solution")
        rate = analysis.a_star + lp.b_star
    else:
        rate = Fraction(min(analysis.a_star, p.K - 1))
    plan = plan_field(analysis, q, lp)
    if prime is not None:
        plan = surrogate_plan(plan, prime)
    P = plan.p
    K = p.K

    trial_seed = int(seed)
    for attempt in range(retries):
        rng = make_rng(trial_seed)
        helper = None
        lp_echo = None
        if case is Case.FULL:
            coeff, dims = _full(K, P, rng)
        elif case is Case.OTHER_LT:
            inside = sets.users(analysis.total_set)
            D = analysis.a_star
            coeff = _scalar_keys(K, inside[:-1], inside[-1], D, P, rng)
            dims = {"L": 1, "source_dim": D}
        elif case is Case.OTHER_Q:
            helper = sets.users(sets.universe(K) & ~analysis.q_union)[0]
            D = analysis.a_star
            coeff = _scalar_keys(K, sets.users(analysis.total_set), helper, D, P, rng)
            dims = {"L": 1, "source_dim": D}
        else:
            coeff, dims = _if_case(K, analysis, lp, P, rng)
            lp_echo = {"numerators": dict(lp.numerators), "q_bar": lp.common_denominator}
        scheme = KeyScheme(p, case, plan, dims["L"], dims["source_dim"], coeff, rate,
                           helper_u=helper, lp_echo=lp_echo, seed=int(seed),
                           retry_count=attempt)
        ok, restricted = _generic_position(scheme, analysis)
        scheme = replace(scheme, generic_ok=ok, generic_restricted=restricted)
        if ok or not require_generic:
            _check_invariants(scheme)
            return scheme
        logger.debug("generic position failed on attempt %d (p=%d)", attempt, P)
        trial_seed = derive_seed(trial_seed)
    raise RetryExhausted(f"generic position failed {retries} times over F_{P}")


def _check_invariants(scheme: KeyScheme) -> None:
    D = scheme.source_dim
    acc = None
    for k in range(1, scheme.K + 1):
        C = scheme.coeff[k]
        if C.cols != D:
            raise DimensionMismatch(f"user {k} coefficients have {C.cols} columns, expected {D}")
        if C.rows not in (0, scheme.L):
            raise DimensionMismatch(f"user {k} key length {C.rows} not in (0, L)")
        if C.rows:
            acc = C if acc is None else acc + C
    if acc is not None and not acc.is_zero():
        raise AssertionError("key coefficients do not sum to zero")
    if Fraction(D, scheme.L) != scheme.rate:
        raise AssertionError(f"source_dim/L = {D}/{scheme.L} differs from rate {scheme.rate}")


# -- generic position ------------------------------------------------------


def _independent_subsets(rows: dict[int, FMatrix], size: int, D: int, p: int) -> bool:
    keys = sorted(rows)
    size = min(size, len(keys))
    for combo in combinations(keys, size):
        if field_rank(vstack([rows[k] for k in combo], D, p)) != size:
            return False
    return True


def _generic_position(scheme: KeyScheme, analysis: RateAnalysis) -> tuple[bool, bool]:
    D, P, K = scheme.source_dim, scheme.p, scheme.K
    case = scheme.case_label
    if case is Case.FULL:
        return _independent_subsets(scheme.coeff, K - 1, D, P), False
    if case in (Case.OTHER_LT, Case.OTHER_Q):
        keyed = {k: m for k, m in scheme.coeff.items() if m.rows}
        return _independent_subsets(keyed, analysis.a_star, D, P), False

    nums = scheme.lp_echo["numerators"]
    q_bar = scheme.lp_echo["q_bar"]
    weight = {k: nums.get(k, q_bar) for k in range(1, K + 1)}
    for k in range(1, K + 1):
        if field_rank(scheme.coeff[k]) != weight[k]:
            return False, False
    budget = D   # (a* + b*) q_bar rows
    users = list(range(1, K + 1))
    restricted = (1 << K) > MAX_BLOCK_SUBSETS
    if restricted:
        candidates = set()
        for s, t in scheme.pattern.pairs():
            candidates.add(s | t)
            candidates.add(t)
        masks = sorted(candidates)
    else:
        masks = range(1 << K)
    for mask in masks:
        members = sets.users(mask)
        w = sum(weight[k] for k in members)
        if w > budget:
            continue
        if not restricted and any(
            k not in members and weight[k] and w + weight[k] <= budget for k in users
        ):
            continue   # not maximal; covered by a superset
        stack = vstack([scheme.coeff[k] for k in members], D, P)
        if field_rank(stack) != w:
            return False, restricted
    return True, restricted


def generic_position_check(scheme: KeyScheme, analysis: RateAnalysis) -> bool:
    return _generic_position(scheme, analysis)[0]


def expand_keys(scheme: KeyScheme, z_sigma: FMatrix) -> dict[int, FMatrix]:
    if z_sigma.rows != scheme.source_dim or z_sigma.cols != 1:
        raise DimensionMismatch(
            f"source key must be a {scheme.source_dim}x1 column, got {z_sigma.shape}")
    return {k: C @ z_sigma for k, C in scheme.coeff.items()}
