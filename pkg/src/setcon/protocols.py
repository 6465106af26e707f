"""Wait-free protocols as runtime programs.

* :class:`LAgreement` -- at most ``l`` distinct decisions over two snapshot
  objects; blocks only if ``l`` or more participants stall between their
  two writes.
* :class:`StaticProtocol` -- partitions ``n`` processes along a witness
  multiset, one set-consensus object per group.
* :class:`AdaptiveProtocol` -- re-runs the static protocol sized to the
  currently observed participation until participation stops growing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from .calculus import Collection, ObjectSpec, Witness, parse_collection, witness
from .runtime import PARK, Program, Propose, Snapshot, Update

__all__ = [
    "AdaptiveProtocol",
    "AdaptiveState",
    "LAgreement",
    "LAgreementState",
    "StaticProtocol",
    "build_static",
    "l_agreement",
    "parse_protocol",
    "smallest_view",
    "tie_break_adopt",
    "value_order",
]


# -- l-agreement ----------------------------------------------------------------


@dataclass
class LAgreementState:
    l: int
    phase: str = "write-A"
    U: tuple | None = None
    W: tuple | None = None
    X: frozenset[int] = frozenset()
    decision: Any = None


def value_order(v: Any) -> tuple:
    """Total order on proposals: bottom first, tuples element-wise (they may hold bottom)."""
    if v is None:
        return (0,)
    if isinstance(v, tuple):
        return (3, tuple(value_order(x) for x in v))
    if isinstance(v, (int, float)):
        return (1, v)
    if isinstance(v, str):
        return (2, v)
    return (4, repr(v))


def smallest_view(W: tuple) -> tuple:
    """The non-empty written snapshot with the fewest non-bottom entries."""
    views = [w for w in W if w is not None]
    size = min(sum(v is not None for v in w) for w in views)
    smallest = {w for w in views if sum(v is not None for v in w) == size}
    # views of A are related by containment, so equal size means equal view
    assert len(smallest) == 1, f"incomparable snapshots in B: {smallest}"
    return smallest.pop()


def l_agreement(prefix: str, l: int, value: Any, state: LAgreementState | None = None) -> Program:
    """Program for one participant proposing ``value``.

    Uses snapshot objects ``{prefix}A`` and ``{prefix}B``.  Yields
    :data:`PARK` each time the exit condition of the scan loop fails.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    st = state if state is not None else LAgreementState(l)
    A, B = f"{prefix}A", f"{prefix}B"
    st.phase = "write-A"
    yield Update(A, value)
    st.phase = "scan-A"
    st.U = yield Snapshot(A)
    st.phase = "write-B"
    yield Update(B, st.U)
    st.phase = "scan-B-loop"
    while True:
        st.W = yield Snapshot(B)
        st.X = frozenset(q for q, u in enumerate(st.U) if u is not None and st.W[q] is None)
        if len(st.X) <= l - 1:
            break
        yield PARK
    view = smallest_view(st.W)
    st.decision = min((v for v in view if v is not None), key=value_order)
    st.phase = "done"
    return st.decision


@dataclass
class LAgreement:
    l: int
    prefix: str = ""
    name: str = field(init=False)

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("l must be at least 1")
        self.name = f"l-agreement:{self.l}"

    def validate(self, n: int) -> None:
        if n < 1:
            raise ValueError("need at least one process")

    def program(self, pid: int, value: Any) -> Program:
        return l_agreement(self.prefix, self.l, value)


# -- static partition protocol --------------------------------------------------


@dataclass
class StaticProtocol:
    """Processes 0..n-1 split by prefix sums over the witness part sizes."""

    collection: Collection
    n: int
    witness: Witness
    prefix: str = ""
    group_of: dict[int, int] = field(default_factory=dict)
    position_in_group: dict[int, int] = field(default_factory=dict)
    objects: dict[int, tuple[str, ObjectSpec]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.group_of:
            bound = 0
            for g, (t, s) in enumerate(self.witness.parts):
                for i in range(bound, min(bound + t, self.n)):
                    self.group_of[i] = g
                    self.position_in_group[i] = i - bound
                bound += t
            missing = [i for i in range(self.n) if i not in self.group_of]
            if missing:
                raise ValueError(f"witness {self.witness} does not cover processes {missing}")
            for g, (t, s) in enumerate(self.witness.parts):
                if (t, s) != (1, 1):
                    self.objects[g] = (f"{self.prefix}st{self.n}/g{g}", ObjectSpec(t, s))

    name = "static"

    def validate(self, n: int) -> None:
        if n != self.n:
            raise ValueError(f"static protocol built for n={self.n}, not {n}")

    def groups(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.witness.parts]
        for pid in range(self.n):
            out[self.group_of[pid]].append(pid)
        return out

    def program(self, pid: int, value: Any) -> Program:
        g = self.group_of[pid]
        if g not in self.objects:
            # (1,1) part: the lone member keeps its own input
            return value
            yield  # pragma: no cover
        name, spec = self.objects[g]
        out = yield Propose(name, spec, value)
        return out


def build_static(
    c: Collection, n: int, wit: Witness | None = None, prefix: str = ""
) -> StaticProtocol:
    wit = wit if wit is not None else witness(c, n)
    return StaticProtocol(c, n, wit, prefix)


# -- optimally adaptive protocol ------------------------------------------------


def tie_break_adopt(r) -> tuple[Any, int]:
    """Adopt the smallest value among those announced at the highest level."""
    pairs = [cell for cell in r if cell is not None]
    if not pairs:
        raise ValueError("no announced (value, level) pair")
    k = max(level for _, level in pairs)
    v = min(value for value, level in pairs if level == k)
    return v, k


@dataclass
class AdaptiveState:
    pid: int
    v_p: Any
    r: tuple | None = None
    P: frozenset[int] = frozenset()
    parts: frozenset[int] = frozenset()
    rank: int = 0
    k: int = 0
    v: Any = None
    prop: Any = None
    history: list[int] = field(default_factory=list)  # |parts| per iteration


class AdaptiveProtocol:
    """Shared snapshot ``R`` of (value, level) pairs plus one static instance per size."""

    name = "adaptive"

    def __init__(self, c: Collection, n: int, prefix: str = ""):
        self.collection = c
        self.n = n
        self.prefix = prefix
        self.R = f"{prefix}R"
        self._static: dict[int, StaticProtocol] = {}

    def validate(self, n: int) -> None:
        if n != self.n:
            raise ValueError(f"adaptive protocol built for n={self.n}, not {n}")

    def static(self, m: int) -> StaticProtocol:
        proto = self._static.get(m)
        if proto is None:
            proto = self._static[m] = build_static(self.collection, m, prefix=self.prefix)
        return proto

    def program(self, pid: int, value: Any, state: AdaptiveState | None = None) -> Program:
        st = state if state is not None else AdaptiveState(pid, value)
        yield Update(self.R, (value, 0))
        st.r = yield Snapshot(self.R)
        st.P = frozenset(q for q, cell in enumerate(st.r) if cell is not None)
        while True:
            st.parts = st.P
            st.rank = sorted(st.parts).index(pid) + 1
            st.v, st.k = tie_break_adopt(st.r)
            m = len(st.parts)
            st.history.append(m)
            # ST_m runs as position `rank` among q_1..q_m
            st.prop = yield from self.static(m).program(st.rank - 1, st.v)
            yield Update(self.R, (st.prop, m))
            st.r = yield Snapshot(self.R)
            st.P = frozenset(q for q, cell in enumerate(st.r) if cell is not None)
            if st.parts == st.P:
                return st.prop


# -- descriptors ----------------------------------------------------------------

_LAGREE = re.compile(r"^l-agreement(?::(\d+)|\(l=(\d+)\))$")


def parse_protocol(name: str, collection: Collection | str | None = None, n: int | None = None):
    """Build a protocol from ``static``, ``adaptive``, ``l-agreement:K`` or ``l-agreement(l=K)``."""
    m = _LAGREE.match(name)
    if m:
        return LAgreement(int(m.group(1) or m.group(2)))
    if name not in ("static", "adaptive"):
        raise ValueError(f"unknown protocol {name!r}")
    if collection is None or n is None:
        raise ValueError(f"protocol {name!r} needs a collection and n")
    c = parse_collection(collection) if isinstance(collection, str) else collection
    if name == "static":
        return build_static(c, n)
    return AdaptiveProtocol(c, n)
