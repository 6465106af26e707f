"""Set-consensus collections and their agreement power.

A collection is a set of ``(ell, j)`` species: any ``ell`` processes can
reach ``j``-set consensus through one object of that species.  The
agreement level of a collection for ``n`` processes is the smallest total
disagreement over multisets of species that together cover ``n``
processes.  It is computed here with an unbounded-Knapsack style dynamic
program, and cross-checked with an exhaustive search.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "AgreementTable",
    "Collection",
    "CollectionError",
    "ObjectSpec",
    "Witness",
    "agreement_table",
    "al",
    "brute_force_al",
    "complete",
    "normalize",
    "parse_collection",
    "scn",
    "solvable",
    "witness",
]

BRUTE_FORCE_LIMIT = 14


class CollectionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ObjectSpec:
    ell: int
    j: int

    def __post_init__(self):
        if not (isinstance(self.ell, int) and isinstance(self.j, int)):
            raise CollectionError(f"non-integer spec ({self.ell!r},{self.j!r})")
        if self.j < 1:
            raise CollectionError(f"j must be positive in ({self.ell},{self.j})")
        if self.ell < self.j:
            raise CollectionError(f"j > ell in ({self.ell},{self.j})")

    def covers(self, t: int, s: int) -> bool:
        return self.ell >= t and self.j <= s

    def __str__(self) -> str:
        return f"{self.ell}:{self.j}"


UNIT = ObjectSpec(1, 1)


@dataclass(frozen=True)
class Collection:
    """Normalized collection: starts with (1,1), strictly increasing in ell and j.

    Build one with :func:`normalize` or :func:`parse_collection`; the
    constructor only validates.
    """

    specs: tuple[ObjectSpec, ...]

    def __post_init__(self):
        specs = tuple(self.specs)
        object.__setattr__(self, "specs", specs)
        if not specs or specs[0] != UNIT:
            raise CollectionError("collection must start with (1,1)")
        for i in range(1, len(specs)):
            a, b = specs[i - 1], specs[i]
            if not a.ell < b.ell:
                raise CollectionError(f"ell not strictly increasing at {a}, {b}")
            if i > 1 and not a.j < b.j:
                raise CollectionError(f"j not strictly increasing at {a}, {b}")

    def __iter__(self):
        return iter(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    def __getitem__(self, i):
        return self.specs[i]

    def __str__(self) -> str:
        return ",".join(str(s) for s in self.specs)

    def with_spec(self, spec: ObjectSpec) -> "Collection":
        return normalize([*self.specs, spec])

    def cover(self, t: int, s: int) -> ObjectSpec | None:
        """Smallest species able to serve a group of ``t`` processes with ``s`` outputs."""
        for spec in self.specs:
            if spec.covers(t, s):
                return spec
        return None


@dataclass(frozen=True)
class AgreementTable:
    n: int
    levels: tuple[int, ...]
    # choice[r] is the completed spec taken last at cell r (None at r=0)
    choice: tuple[ObjectSpec | None, ...] = field(repr=False, compare=False, default=())

    def __getitem__(self, r: int) -> int:
        return self.levels[r]

    def to_tsv(self) -> str:
        rows = ["r\tAL"] + [f"{r}\t{v}" for r, v in enumerate(self.levels)]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class Witness:
    """Multiset of (t, s) parts with sum(s) = AL_n and sum(t) >= n.

    Parts are listed in extraction order, each lifted to the collection
    species it was completed from, so ``t`` is a real object capacity.
    """

    n: int
    parts: tuple[tuple[int, int], ...]

    @property
    def total_t(self) -> int:
        return sum(t for t, _ in self.parts)

    @property
    def total_s(self) -> int:
        return sum(s for _, s in self.parts)

    def __str__(self) -> str:
        return ",".join(f"{t}:{s}" for t, s in self.parts)


_PAIR = re.compile(r"^\s*(-?\d+)\s*:\s*(-?\d+)\s*$")


def parse_collection(text: str) -> Collection:
    """Parse ``"ell:j,ell:j,..."`` into a normalized collection."""
    specs = []
    for token in text.split(","):
        m = _PAIR.match(token)
        if m is None:
            raise CollectionError(f"malformed pair {token.strip()!r}")
        ell, j = int(m.group(1)), int(m.group(2))
        if ell < 1 or j < 1:
            raise CollectionError(f"non-positive integer in {token.strip()!r}")
        if j > ell:
            raise CollectionError(f"j > ell in {token.strip()!r}")
        specs.append(ObjectSpec(ell, j))
    return normalize(specs)


def normalize(specs: Iterable[ObjectSpec]) -> Collection:
    pool = set(specs) | {UNIT}
    # (1,1) is kept even when some (ell, 1) dominates it
    kept = [
        a
        for a in pool
        if a == UNIT
        or not any(b != a and b.ell >= a.ell and b.j <= a.j for b in pool)
    ]
    return Collection(tuple(sorted(kept)))


def _check_n(n: int, name: str = "n") -> None:
    if not isinstance(n, int) or n < 1:
        raise CollectionError(f"{name} must be a positive integer, got {n!r}")


def complete(c: Collection, n: int) -> tuple[ObjectSpec, ...]:
    """Completion of ``c`` for ``n`` processes.

    For every species ``(ell_i, j_i)`` with ``j_i < n`` this lists every
    group size from ``max(j_i + 1, ell_{i-1} + 1)`` up to ``min(ell_i, n)``
    at disagreement ``j_i``.  The result is not dominance-free.
    """
    _check_n(n)
    out = [UNIT]
    specs = c.specs
    for i in range(1, len(specs)):
        ell, j = specs[i].ell, specs[i].j
        if j >= n:
            continue
        lo = max(j + 1, specs[i - 1].ell + 1)
        hi = min(ell, n)
        out.extend(ObjectSpec(t, j) for t in range(lo, hi + 1))
    return tuple(out)


def agreement_table(c: Collection, n: int) -> AgreementTable:
    _check_n(n)
    done = complete(c, n)
    levels = [0] * (n + 1)
    choice: list[ObjectSpec | None] = [None] * (n + 1)
    for r in range(1, n + 1):
        best = None
        for spec in done:
            if spec.ell > r:
                continue
            cost = spec.j + levels[r - spec.ell]
            if best is None or cost < best[0]:
                best = (cost, spec)
            elif cost == best[0] and (spec.ell, -spec.j) > (best[1].ell, -best[1].j):
                best = (cost, spec)
        levels[r], choice[r] = best
    return AgreementTable(n, tuple(levels), tuple(choice))


def al(c: Collection, n: int) -> int:
    return agreement_table(c, n).levels[n]


def witness(c: Collection, n: int) -> Witness:
    table = agreement_table(c, n)
    parts = []
    r = n
    while r > 0:
        spec = table.choice[r]
        src = c.cover(spec.ell, spec.j)
        parts.append((src.ell, src.j))
        r -= spec.ell
    return Witness(n, tuple(parts))


def scn(c: Collection, j: int) -> int:
    """Largest n with AL_n <= j: unbounded Knapsack over (value=ell, weight=j)."""
    _check_n(j, "j")
    best = [0] * (j + 1)
    for w in range(1, j + 1):
        best[w] = max(s.ell + best[w - s.j] for s in c.specs if s.j <= w)
    return best[j]


def solvable(c: Collection, n: int, k: int) -> bool:
    _check_n(n)
    _check_n(k, "k")
    return al(c, n) <= k


def brute_force_al(c: Collection, n: int, *, use_completion: bool = True) -> int:
    """Exhaustive minimum of sum(j x) subject to sum(ell x) >= n.

    With ``use_completion`` (the default) the search runs over the
    completed collection; otherwise over the raw species, which is the
    textbook definition and does not depend on completion at all.
    """
    _check_n(n)
    if n > BRUTE_FORCE_LIMIT:
        raise CollectionError(
            f"brute force refused for n={n} > {BRUTE_FORCE_LIMIT} (exponential search)"
        )
    specs: Sequence[ObjectSpec] = complete(c, n) if use_completion else c.specs
    best = n + 1

    def search(i: int, covered: int, cost: int) -> None:
        nonlocal best
        if cost >= best:
            return
        if covered >= n:
            best = cost
            return
        if i == len(specs):
            return
        ell, j = specs[i].ell, specs[i].j
        x = 0
        # once covered >= n, more copies only add cost
        while x <= n:
            search(i + 1, covered + ell * x, cost + j * x)
            if covered + ell * x >= n:
                break
            x += 1

    search(0, 0, 0)
    return best
