"""Matrices over a prime field F_p and the working-field plan.

Instead of building an extension field F_{q^B}, schemes run over the
smallest prime ``p`` above the generic-position size bound; one F_p element
stands in for one extension symbol.  The Schwartz-Zippel argument only needs
the field to be large enough, so this keeps every rate exact while avoiding
polynomial arithmetic.  :class:`FieldPlan` still records ``q`` and ``B`` so
reports can state the extension-field parameters.
"""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Iterable, Sequence

import numpy as np
from sympy import isprime, nextprime

from .errors import DimensionMismatch, MissingLpError
from .pattern import Case, RateAnalysis

# int64 arithmetic is exact while cols * (p-1)^2 stays below 2^63.
_INT64_PRIME_LIMIT = 1 << 26


class SymbolUnit(str, enum.Enum):
    BASE = "BASE"
    EXTENSION = "EXTENSION"


@dataclass(frozen=True)
class FieldPlan:
    q: int
    B: int
    size_bound: int
    p: int
    symbol_unit: SymbolUnit = SymbolUnit.EXTENSION
    surrogate: bool = False   # p chosen by the caller, not from size_bound

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "B": self.B,
            "size_bound": self.size_bound,
            "p": self.p,
            "symbol_unit": self.symbol_unit.value,
            "surrogate": self.surrogate,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FieldPlan":
        return cls(obj["q"], obj["B"], obj["size_bound"], obj["p"],
                   SymbolUnit(obj.get("symbol_unit", "EXTENSION")),
                   obj.get("surrogate", False))


def extension_degree(q: int, bound: int) -> int:
    """Smallest ``B`` with ``q**B > bound``."""
    B, size = 1, q
    while size <= bound:
        B += 1
        size *= q
    return B


def size_bound(analysis: RateAnalysis, lp=None) -> int:
    a = analysis.a_star
    n_total = bin(analysis.total_set).count("1")
    case = analysis.case_label
    if case is Case.FULL:
        return 1
    if case is Case.OTHER_LT:
        return a * comb(n_total, a)
    if case is Case.OTHER_Q:
        return a * comb(n_total + 1, a)
    if lp is None:
        raise MissingLpError("IF case needs the LP solution to size the field")
    rows = (a + lp.b_star) * lp.common_denominator
    assert rows.denominator == 1
    rows = int(rows)
    return rows * comb(analysis.K * lp.common_denominator, rows)


def plan_field(analysis: RateAnalysis, q: int = 2, lp=None) -> FieldPlan:
    if not isprime(q):
        raise ValueError(f"base field size q={q} must be prime")
    if analysis.case_label is Case.IF and lp is None:
        lp = analysis.lp_solution
    bound = size_bound(analysis, lp)
    return FieldPlan(q=q, B=extension_degree(q, bound), size_bound=bound,
                     p=int(nextprime(bound)))


def surrogate_plan(plan: FieldPlan, p: int) -> FieldPlan:
    if not isprime(p):
        raise ValueError(f"surrogate modulus {p} is not prime")
    return FieldPlan(plan.q, plan.B, plan.size_bound, p, plan.symbol_unit, surrogate=True)


# -- matrices --------------------------------------------------------------


def field_dtype(p: int):
    """numpy dtype that keeps F_p products exact."""
    return np.int64 if p < _INT64_PRIME_LIMIT else object


@dataclass(frozen=True, eq=False)
class FMatrix:
    rows: int
    cols: int
    mod: int
    data: tuple[int, ...]   # row-major, entries in [0, mod)

    def __post_init__(self):
        if len(self.data) != self.rows * self.cols:
            raise DimensionMismatch(
                f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} entries")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], mod: int, cols: int | None = None) -> "FMatrix":
        rows = [list(r) for r in rows]
        if cols is None:
            cols = len(rows[0]) if rows else 0
        if any(len(r) != cols for r in rows):
            raise DimensionMismatch("ragged rows")
        return cls(len(rows), cols, mod, tuple(int(v) % mod for r in rows for v in r))

    @classmethod
    def from_array(cls, arr, mod: int) -> "FMatrix":
        arr = np.asarray(arr, dtype=object)
        r, c = arr.shape
        return cls(r, c, mod, tuple(int(v) % mod for v in arr.ravel()))

    @classmethod
    def zeros(cls, rows: int, cols: int, mod: int) -> "FMatrix":
        return cls(rows, cols, mod, (0,) * (rows * cols))

    @classmethod
    def identity(cls, n: int, mod: int) -> "FMatrix":
        return cls(n, n, mod, tuple(int(i == j) for i in range(n) for j in range(n)))

    @classmethod
    def column(cls, values: Iterable[int], mod: int) -> "FMatrix":
        vals = tuple(int(v) % mod for v in values)
        return cls(len(vals), 1, mod, vals)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.data, dtype=field_dtype(self.mod)).reshape(self.rows, self.cols)
        arr.flags.writeable = False
        return arr

    def tolist(self) -> list[list[int]]:
        c = self.cols
        return [list(self.data[i * c:(i + 1) * c]) for i in range(self.rows)]

    def row(self, i: int) -> tuple[int, ...]:
        return self.data[i * self.cols:(i + 1) * self.cols]

    def _check(self, other: "FMatrix") -> None:
        if other.mod != self.mod:
            raise DimensionMismatch(f"moduli differ: {self.mod} vs {other.mod}")

    def __add__(self, other: "FMatrix") -> "FMatrix":
        self._check(other)
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DimensionMismatch("shape mismatch in addition")
        p = self.mod
        return FMatrix(self.rows, self.cols, p,
                       tuple((a + b) % p for a, b in zip(self.data, other.data)))

    def __neg__(self) -> "FMatrix":
        p = self.mod
        return FMatrix(self.rows, self.cols, p, tuple((-a) % p for a in self.data))

    def __sub__(self, other: "FMatrix") -> "FMatrix":
        return self + (-other)

    def __matmul__(self, other: "FMatrix") -> "FMatrix":
        self._check(other)
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        if self.rows == 0 or other.cols == 0:
            return FMatrix.zeros(self.rows, other.cols, self.mod)
        if self.cols == 0:
            return FMatrix.zeros(self.rows, other.cols, self.mod)
        prod = (self.array.astype(object) @ other.array.astype(object)) % self.mod
        return FMatrix.from_array(prod, self.mod)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FMatrix):
            return NotImplemented
        return (self.rows, self.cols, self.mod, self.data) == (
            other.rows, other.cols, other.mod, other.data)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.mod, self.data))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def is_zero(self) -> bool:
        return not any(self.data)

    def rank(self) -> int:
        return field_rank(self)

    def to_json(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "mod": self.mod, "data": list(self.data)}

    @classmethod
    def from_json(cls, obj: dict) -> "FMatrix":
        return cls(obj["rows"], obj["cols"], obj["mod"], tuple(obj["data"]))

    def __repr__(self) -> str:
        return f"FMatrix({self.rows}x{self.cols} mod {self.mod}, {self.tolist()})"


def vstack(mats: Sequence[FMatrix], cols: int | None = None, mod: int | None = None) -> FMatrix:
    """Row-stack; an empty list needs ``cols`` and ``mod``."""
    if not mats:
        if cols is None or mod is None:
            raise DimensionMismatch("empty stack needs cols and mod")
        return FMatrix(0, cols, mod, ())
    c, p = mats[0].cols, mats[0].mod
    for m in mats:
        if m.cols != c or m.mod != p:
            raise DimensionMismatch("stacked matrices disagree on cols or modulus")
    return FMatrix(sum(m.rows for m in mats), c, p, tuple(v for m in mats for v in m.data))


def hstack(mats: Sequence[FMatrix]) -> FMatrix:
    r, p = mats[0].rows, mats[0].mod
    if any(m.rows != r or m.mod != p for m in mats):
        raise DimensionMismatch("hstack needs equal row counts and modulus")
    rows = [sum((list(m.row(i)) for m in mats), []) for i in range(r)]
    return FMatrix.from_rows(rows, p, cols=sum(m.cols for m in mats))


def rank_array(arr: np.ndarray, p: int) -> int:
    """Rank of an integer array over F_p by Gaussian elimination."""
    M = np.array(arr, dtype=field_dtype(p)) % p
    if M.size == 0:
        return 0
    rows, cols = M.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(M[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            M[[r, piv]] = M[[piv, r]]
        inv = pow(int(M[r, c]), -1, p)
        M[r] = (M[r] * inv) % p
        idx = np.nonzero(M[r + 1:, c])[0] + r + 1
        if idx.size:
            M[idx] = (M[idx] - np.outer(M[idx, c], M[r])) % p
        r += 1
    return r


def field_rank(m: FMatrix) -> int:
    r = rank_array(m.array, m.mod) if m.rows and m.cols else 0
    assert r <= min(m.rows, m.cols)
    return r


# -- randomness ------------------------------------------------------------


def make_rng(seed: int) -> random.Random:
    """Mersenne Twister stream; ``randrange`` rejection-samples, so draws are
    exactly uniform mod ``p`` and reproducible across platforms."""
    return random.Random(int(seed))


def derive_seed(seed: int, *tags) -> int:
    h = hashlib.sha256(repr((int(seed),) + tags).encode()).digest()
    return int.from_bytes(h[:8], "big")


def sample_uniform(rows: int, cols: int, p: int, rng: random.Random | int) -> FMatrix:
    if not isinstance(rng, random.Random):
        rng = make_rng(rng)
    return FMatrix(rows, cols, p, tuple(rng.randrange(p) for _ in range(rows * cols)))
