"""User subsets as integer bitmasks.

User ``k`` (1-indexed) is bit ``k - 1``.  All set algebra in the package is
done on these plain ints.
"""

from __future__ import annotations

from typing import Iterable, Iterator

EMPTY = 0


def from_users(users: Iterable[int]) -> int:
    m = 0
    for u in users:
        m |= 1 << (u - 1)
    return m


def users(mask: int) -> tuple[int, ...]:
    out = []
    k = 1
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def size(mask: int) -> int:
    return mask.bit_count()


def universe(K: int) -> int:
    return (1 << K) - 1


def singleton(u: int) -> int:
    return 1 << (u - 1)


def is_subset(a: int, b: int) -> bool:
    return a & ~b == 0


def submasks(mask: int) -> Iterator[int]:
    """Yield every submask of ``mask`` including ``mask`` and 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def sort_key(mask: int) -> tuple[int, ...]:
    return users(mask)


def fmt(mask: int) -> str:
    return "{" + ",".join(str(u) for u in users(mask)) + "}"
