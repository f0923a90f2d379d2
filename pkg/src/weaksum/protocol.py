"""One-shot summation round: each user sends ``X_k = W_k + Z_k`` to the server.

The server decodes by adding the messages; zero-sum keys cancel.  A
:class:`Transcript` keeps every variable of the round so the audit and the
tests can inspect coalition views after the fact.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import sets
from .errors import CorrectnessError, DimensionMismatch
from .gf import derive_seed, make_rng
from .pattern import closure_contains
from .scheme import KeyScheme

logger = logging.getLogger(__name__)

Column = tuple[int, ...]


@dataclass(frozen=True)
class Transcript:
    scheme_hash: str
    p: int
    L: int
    w: dict[int, Column]
    z_sigma: Column
    z: dict[int, Column]
    x: dict[int, Column]
    decoded_sum: Column
    provenance: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.w)

    def to_json(self) -> dict:
        def enc(col: Column) -> list[str]:
            return [format(v, "x") for v in col]

        return {
            "scheme_hash": self.scheme_hash,
            "p": self.p,
            "L": self.L,
            "w": {str(k): enc(v) for k, v in sorted(self.w.items())},
            "z_sigma": enc(self.z_sigma),
            "z": {str(k): enc(v) for k, v in sorted(self.z.items())},
            "x": {str(k): enc(v) for k, v in sorted(self.x.items())},
            "decoded_sum": enc(self.decoded_sum),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Transcript":
        def dec(vals) -> Column:
            return tuple(int(v, 16) for v in vals)

        def dec_map(m) -> dict[int, Column]:
            return {int(k): dec(v) for k, v in m.items()}

        return cls(obj["scheme_hash"], obj["p"], obj["L"], dec_map(obj["w"]),
                   dec(obj["z_sigma"]), dec_map(obj["z"]), dec_map(obj["x"]),
                   dec(obj["decoded_sum"]), obj.get("provenance", {}))


@dataclass(frozen=True)
class CoalitionView:
    coalition: int
    x: dict[int, Column]
    w: dict[int, Column]          # only coalition members
    z: dict[int, Column]          # only coalition members
    decoded_sum: Column


def _apply(C, z_sigma: Column, p: int) -> Column:
    return tuple(sum(a * b for a, b in zip(C.row(i), z_sigma)) % p for i in range(C.rows))


def run_round(scheme: KeyScheme, w: dict[int, Sequence[int]] | None = None,
              z_sigma: Sequence[int] | None = None, seed: int | None = None,
              scheme_hash: str | None = None) -> Transcript:
    """Run one round; missing inputs / source key are sampled from ``seed``."""
    p, L, K, D = scheme.p, scheme.L, scheme.K, scheme.source_dim
    rng: random.Random | None = None
    if w is None or z_sigma is None:
        rng = make_rng(0 if seed is None else seed)
    provenance = {"w": "explicit" if w is not None else "sampled",
                  "z_sigma": "explicit" if z_sigma is not None else "sampled",
                  "seed": seed}
    if w is None:
        w = {k: tuple(rng.randrange(p) for _ in range(L)) for k in range(1, K + 1)}
    else:
        w = {int(k): tuple(int(v) % p for v in col) for k, col in w.items()}
    if z_sigma is None:
        z_sigma = tuple(rng.randrange(p) for _ in range(D))
    else:
        z_sigma = tuple(int(v) % p for v in z_sigma)

    if sorted(w) != list(range(1, K + 1)):
        raise DimensionMismatch(f"inputs must cover users 1..{K}")
    if any(len(col) != L for col in w.values()):
        raise DimensionMismatch(f"every input must have L={L} symbols")
    if len(z_sigma) != D:
        raise DimensionMismatch(f"source key must have {D} symbols")

    z = {k: _apply(scheme.coeff[k], z_sigma, p) for k in range(1, K + 1)}
    x = {}
    for k in range(1, K + 1):
        zk = z[k] if z[k] else (0,) * L
        x[k] = tuple((a + b) % p for a, b in zip(w[k], zk))

    # server side: one message per user, decode by summation
    decoded = tuple(sum(x[k][i] for k in range(1, K + 1)) % p for i in range(L))

    if any(len(x[k]) != L for k in x):
        raise CorrectnessError("message length differs from L")
    expected = tuple(sum(w[k][i] for k in range(1, K + 1)) % p for i in range(L))
    if decoded != expected:
        raise CorrectnessError(f"decoded {decoded} but the inputs sum to {expected}")
    return Transcript(scheme_hash or scheme.hash, p, L, w, z_sigma, z, x, decoded, provenance)


def simulate(scheme: KeyScheme, rounds: int, seed: int) -> list[Transcript]:
    """Independent rounds; round ``i`` draws from ``derive_seed(seed, i)``."""
    h = scheme.hash
    return [run_round(scheme, seed=derive_seed(seed, "round", i), scheme_hash=h)
            for i in range(rounds)]


def coalition_view(t: Transcript, coalition: int | Iterable[int],
                   colluding_gens: Sequence[int] | None = None) -> CoalitionView:
    """What the server sees when colluding with ``coalition``."""
    mask = coalition if isinstance(coalition, int) else sets.from_users(coalition)
    if colluding_gens is not None and not closure_contains(colluding_gens, mask):
        logger.warning("coalition %s is outside the colluding system", sets.fmt(mask))
    members = sets.users(mask)
    return CoalitionView(
        coalition=mask,
        x=dict(t.x),
        w={k: t.w[k] for k in members},
        z={k: t.z[k] for k in members},
        decoded_sum=t.decoded_sum,
    )
