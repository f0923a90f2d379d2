"""Optimal key rate: the min-max covering LP and its exact solution.

In the IF case the rate is ``a* + b*`` where ``b*`` is

    min  max_j  sum_{k in O_j} b_k
    s.t. sum_{k in C_j} b_k >= 1   for every achieving pair j
         b_k >= 0

with ``O_j = T_j minus S_bar`` and ``C_j = [K] minus (S_j u T_j)``.  It is
solved in epigraph form (``min b`` with ``sum_{O_j} b_k <= b``) by a dense
two-phase simplex over :class:`fractions.Fraction` with Bland's rule, so
the result is an exact vertex whose denominators feed the key
construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations, islice
from math import lcm
from typing import Iterable, Sequence

import numpy as np

from . import sets
from .errors import InternalFault, WrongCaseError
from .pattern import Case, Pattern, RateAnalysis, analyze

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LpInstance:
    variables: tuple[int, ...]                       # user ids outside S_bar
    objective_terms: tuple[frozenset[int], ...]      # variable positions
    cover_constraints: tuple[frozenset[int], ...]    # variable positions

    def __post_init__(self):
        n = len(self.variables)
        for term in self.objective_terms + self.cover_constraints:
            if any(i < 0 or i >= n for i in term):
                raise ValueError("LP term indexes an undeclared variable")
        if any(not c for c in self.cover_constraints):
            raise ValueError("empty cover constraint makes the LP infeasible")

    def user_sets(self) -> dict:
        def to_users(idx):
            return sorted(self.variables[i] for i in idx)

        return {
            "variables": list(self.variables),
            "objective_terms": [to_users(o) for o in self.objective_terms],
            "cover_constraints": [to_users(c) for c in self.cover_constraints],
        }


@dataclass(frozen=True)
class LpSolution:
    b_values: dict[int, Fraction]   # user -> b*_k
    b_star: Fraction
    common_denominator: int         # q_bar
    numerators: dict[int, int]      # user -> p_k, b*_k = p_k / q_bar

    @property
    def p_bar(self) -> int:
        return sum(self.numerators.values())

    @classmethod
    def from_values(cls, b_values: dict[int, Fraction], b_star: Fraction) -> "LpSolution":
        q_bar = 1
        for v in b_values.values():
            q_bar = lcm(q_bar, v.denominator)
        nums = {k: int(v * q_bar) for k, v in b_values.items()}
        return cls(dict(b_values), Fraction(b_star), q_bar, nums)


def _drop_supersets(families: Iterable[frozenset[int]]) -> list[frozenset[int]]:
    uniq = set(families)
    return [a for a in uniq if not any(b < a for b in uniq)]


def _drop_subsets(families: Iterable[frozenset[int]]) -> list[frozenset[int]]:
    uniq = set(families)
    return [a for a in uniq if not any(a < b for b in uniq)]


def _canon(families: list[frozenset[int]]) -> tuple[frozenset[int], ...]:
    return tuple(sorted(families, key=lambda f: (len(f), sorted(f))))


def lp_from_pairs(K: int, total_set: int, pairs: Sequence[tuple[int, int]],
                  reduce: bool = True) -> LpInstance:
    """Assemble the LP from (S, T) pairs whose union contains ``total_set``.

    With ``reduce`` a cover constraint that is a superset of another is
    dropped (implied under ``b >= 0``) and an objective term contained in
    another is dropped (never the max).
    """
    variables = sets.users(sets.universe(K) & ~total_set)
    pos = {u: i for i, u in enumerate(variables)}

    def index(mask: int) -> frozenset[int]:
        return frozenset(pos[u] for u in sets.users(mask))

    full = sets.universe(K)
    objective = [index(t & ~total_set) for _, t in pairs]
    cover = [index(full & ~(s | t)) for s, t in pairs]
    if reduce:
        objective = _drop_subsets(objective)
        cover = _drop_supersets(cover)
    else:
        objective = list(dict.fromkeys(objective))
        cover = list(dict.fromkeys(cover))
    return LpInstance(tuple(variables), _canon(objective), _canon(cover))


def build_lp(analysis: RateAnalysis, p: Pattern | None = None) -> LpInstance:
    if analysis.case_label is not Case.IF:
        raise WrongCaseError(f"LP only defined in the IF case, got {analysis.case_label}")
    return lp_from_pairs(analysis.K, analysis.total_set, analysis.achieving_pairs)


# -- exact simplex ---------------------------------------------------------


class _Infeasible(Exception):
    pass


def _pivot(tab: list[list[Fraction]], r: int, c: int) -> None:
    row = tab[r]
    inv = 1 / row[c]
    tab[r] = row = [v * inv for v in row]
    for i, other in enumerate(tab):
        if i != r and other[c] != 0:
            f = other[c]
            tab[i] = [a - f * b for a, b in zip(other, row)]


def _run(tab: list[list[Fraction]], basis: list[int], obj: list[Fraction],
         allowed: int) -> None:
    """Minimize over columns ``< allowed``; ``obj`` is the reduced-cost row."""
    m = len(basis)
    while True:
        enter = next((j for j in range(allowed) if obj[j] < 0), None)
        if enter is None:
            return
        best = None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            raise InternalFault("LP unbounded; cannot happen for min b with b >= 0")
        r = best[1]
        tab.append(obj)
        _pivot(tab, r, enter)
        obj[:] = tab.pop()
        basis[r] = enter


def simplex_min(A: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction],
                cost: Sequence[Fraction]) -> tuple[list[Fraction], Fraction]:
    """Minimize ``cost . x`` s.t. ``A x = rhs``, ``x >= 0`` exactly.

    Two-phase tableau simplex with Bland's rule; deterministic for a given
    input.  Raises ``_Infeasible`` when no feasible point exists.
    """
    m, n = len(A), len(cost)
    tab: list[list[Fraction]] = []
    for i in range(m):
        row = [Fraction(v) for v in A[i]]
        b = Fraction(rhs[i])
        if b < 0:
            row, b = [-v for v in row], -b
        art = [Fraction(0)] * m
        art[i] = Fraction(1)
        tab.append(row + art + [b])
    basis = [n + i for i in range(m)]

    # phase I: minimize the sum of artificials
    obj = [Fraction(0)] * (n + m + 1)
    for i in range(m):
        for j in range(n):
            obj[j] -= tab[i][j]
        obj[-1] -= tab[i][-1]
    _run(tab, basis, obj, n + m)
    if obj[-1] != 0:
        raise _Infeasible()

    # drive zero-level artificials out of the basis, dropping redundant rows
    i = 0
    while i < len(basis):
        if basis[i] >= n:
            col = next((j for j in range(n) if tab[i][j] != 0), None)
            if col is None:
                del tab[i], basis[i]
                continue
            _pivot(tab, i, col)
            basis[i] = col
        i += 1
    tab = [row[:n] + [row[-1]] for row in tab]

    # phase II
    obj = [Fraction(c) for c in cost] + [Fraction(0)]
    for i, bcol in enumerate(basis):
        c = obj[bcol]
        if c != 0:
            obj = [o - c * t for o, t in zip(obj, tab[i])]
    _run(tab, basis, obj, n)

    x = [Fraction(0)] * n
    for i, bcol in enumerate(basis):
        x[bcol] = tab[i][-1]
    value = sum((Fraction(c) * v for c, v in zip(cost, x)), Fraction(0))
    return x, value


def solve_lp_exact(lp: LpInstance) -> LpSolution:
    n = len(lp.variables)
    J = len(lp.objective_terms)
    I = len(lp.cover_constraints)
    # columns: b_1..b_n, b, slack_1..slack_J, surplus_1..surplus_I
    ncols = n + 1 + J + I
    A: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for j, term in enumerate(lp.objective_terms):
        row = [Fraction(0)] * ncols
        for k in term:
            row[k] = Fraction(1)
        row[n] = Fraction(-1)
        row[n + 1 + j] = Fraction(1)
        A.append(row)
        rhs.append(Fraction(0))
    for i, cons in enumerate(lp.cover_constraints):
        row = [Fraction(0)] * ncols
        for k in cons:
            row[k] = Fraction(1)
        row[n + 1 + J + i] = Fraction(-1)
        A.append(row)
        rhs.append(Fraction(1))
    cost = [Fraction(0)] * ncols
    cost[n] = Fraction(1)
    try:
        x, value = simplex_min(A, rhs, cost)
    except _Infeasible as exc:
        raise InternalFault("covering LP reported infeasible") from exc
    b_values = {u: x[i] for i, u in enumerate(lp.variables)}
    sol = LpSolution.from_values(b_values, value)
    if objective_value(lp, sol) != sol.b_star:
        raise InternalFault("epigraph value differs from the max objective term")
    return sol


def objective_value(lp: LpInstance, sol: LpSolution) -> Fraction:
    vals = [sol.b_values[u] for u in lp.variables]
    return max((sum((vals[k] for k in t), Fraction(0)) for t in lp.objective_terms),
               default=Fraction(0))


def is_feasible(lp: LpInstance, sol: LpSolution) -> bool:
    vals = [sol.b_values[u] for u in lp.variables]
    if any(v < 0 for v in vals):
        return False
    return all(sum((vals[k] for k in c), Fraction(0)) >= 1 for c in lp.cover_constraints)


def lemma5_check(sol: LpSolution) -> bool:
    """``b* == sum_k b*_k - 1`` exactly."""
    return sol.b_star == sum(sol.b_values.values(), Fraction(0)) - 1


def optimal_rate(p: Pattern) -> tuple[RateAnalysis, Fraction]:
    analysis = analyze(p)
    if analysis.case_label is Case.IF:
        lp = build_lp(analysis, p)
        sol = solve_lp_exact(lp)
        if not lemma5_check(sol):
            logger.warning("LP optimum violates b* = sum b_k - 1 for %s: %s", p, sol)
        rate = analysis.a_star + sol.b_star
        analysis = replace(analysis, lp_solution=sol, rate=rate)
    else:
        rate = Fraction(min(analysis.a_star, p.K - 1))
        analysis = replace(analysis, rate=rate)
    return analysis, rate


# -- independent oracle ----------------------------------------------------


def _solve_square(M: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan on a square system; None when singular."""
    n = len(M)
    aug = [list(r) + [b] for r, b in zip(M, rhs)]
    for c in range(n):
        piv = next((r for r in range(c, n) if aug[r][c] != 0), None)
        if piv is None:
            return None
        aug[c], aug[piv] = aug[piv], aug[c]
        pv = aug[c][c]
        aug[c] = [v / pv for v in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    return [aug[r][n] for r in range(n)]


def vertex_oracle(lp: LpInstance) -> Fraction:
    """Minimum of ``b`` over every vertex of the epigraph polyhedron.

    Brute force over all square subsystems of tight inequalities; shares no
    code with the simplex path.
    """
    n = len(lp.variables)
    d = n + 1
    ineqs: list[tuple[list[Fraction], Fraction]] = []   # g . y >= h
    for term in lp.objective_terms:
        g = [Fraction(0)] * d
        for k in term:
            g[k] = Fraction(-1)
        g[n] = Fraction(1)
        ineqs.append((g, Fraction(0)))
    for cons in lp.cover_constraints:
        g = [Fraction(0)] * d
        for k in cons:
            g[k] = Fraction(1)
        ineqs.append((g, Fraction(1)))
    for k in range(d):
        g = [Fraction(0)] * d
        g[k] = Fraction(1)
        ineqs.append((g, Fraction(0)))

    # Integer coefficient matrices: |det| >= 1 when nonsingular, so a float
    # determinant screens out singular subsystems before the exact solve.
    # The float solve then discards vertices that are clearly infeasible; the
    # tolerance is loose so no exactly feasible vertex is lost.
    G = np.array([[float(v) for v in g] for g, _ in ineqs])
    h = np.array([float(hv) for _, hv in ineqs])
    best: Fraction | None = None
    combos = combinations(range(len(ineqs)), d)
    while True:
        batch = np.array(list(islice(combos, 4096)), dtype=np.intp)
        if batch.size == 0:
            break
        systems = G[batch]
        batch = batch[np.abs(np.linalg.det(systems)) > 0.5]
        if batch.size == 0:
            continue
        ys = np.linalg.solve(G[batch], h[batch][..., None])[..., 0]
        slack = ys @ G.T - h
        for row in batch[(slack > -1e-6).all(axis=1)]:
            chosen = row.tolist()
            y = _solve_square([ineqs[i][0] for i in chosen], [ineqs[i][1] for i in chosen])
            if y is None:
                continue
            if all(sum((gi * yi for gi, yi in zip(g, y)), Fraction(0)) >= h for g, h in ineqs):
                if best is None or y[n] < best:
                    best = y[n]
    if best is None:
        raise InternalFault("no vertex found")
    return best


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)


def rate_report(analysis: RateAnalysis) -> dict:
    sol = analysis.lp_solution
    report = {
        "K": analysis.K,
        "a_star": analysis.a_star,
        "case": analysis.case_label.value,
        "implicit_set": list(sets.users(analysis.implicit_set)),
        "total_set": list(sets.users(analysis.total_set)),
        "q_union": list(sets.users(analysis.q_union)),
        "b_star": format_fraction(sol.b_star) if sol else None,
        "rate": format_fraction(analysis.rate),
        "b_values": {str(u): format_fraction(v) for u, v in sol.b_values.items()} if sol else {},
        "achieving_pairs": [
            {"S": list(sets.users(s)), "T": list(sets.users(t))}
            for s, t in analysis.achieving_pairs
        ],
    }
    if sol:
        report["common_denominator"] = sol.common_denominator
        report["numerators"] = {str(u): v for u, v in sol.numerators.items()}
    return report
