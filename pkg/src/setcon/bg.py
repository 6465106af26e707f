"""Generalized BG simulation over snapshot memory.

``m`` simulators jointly run an ``n``-process protocol that uses
set-consensus objects, with nothing but snapshot objects and
l-agreement instances.  Each simulator keeps, in its cell of a shared
board, its latest estimate of every simulated process.  Steps are fixed
by agreement:

* the input of a simulated process: 1-agreement on simulator inputs;
* a simulated snapshot: 1-agreement on a simulated memory vector;
* a simulated (t, s)-object access: one s-agreement per object (each
  simulator enters it once, for the first accessor it handles) followed
  by a 1-agreement per accessing process on its outcome.

Simulated updates need no agreement; they become visible when the new
state is published.  A simulator whose agreement cannot exit yet parks
it and moves to the next simulated process.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

from .calculus import Collection, al
from .protocols import LAgreementState, build_static, l_agreement
from .runtime import PARK, Program, Propose, Schedule, Snapshot, Status, Trace, Update, World

__all__ = [
    "BGProtocol",
    "BGResult",
    "SimState",
    "SimulatorState",
    "bg_run",
    "blocked_inventory",
]

BOARD = "bg/board"


@dataclass(frozen=True)
class SimState:
    """Agreed state of one simulated process after ``pos`` simulated steps."""

    pid: int
    pos: int
    input: Any
    results: tuple = ()
    memory: tuple = ()  # ((object, value), ...) written by this process, sorted
    accesses: tuple = ()  # ((object, proposed, returned), ...)
    decided: bool = False
    decision: Any = None

    def read(self, obj: str) -> Any:
        for name, value in self.memory:
            if name == obj:
                return value
        return None


@dataclass
class Attempt:
    key: tuple
    param: int
    program: Program
    state: LAgreementState
    op: Any


@dataclass
class SimulatorState:
    id: int
    input: Any
    cursor: int = 0
    estimates: list = field(default_factory=list)
    parked: dict = field(default_factory=dict)  # key -> Attempt
    agreed: dict = field(default_factory=dict)  # key -> decided value
    sc_value: dict = field(default_factory=dict)  # object -> own s-agreement output
    output: Any = None


@dataclass(frozen=True)
class InstanceInfo:
    key: tuple
    param: int
    tag: tuple[int, int]  # (t, s) blocked if this instance never decides


class BGProtocol:
    """Simulator program; one instance per BG world."""

    name = "bg-sim"

    def __init__(self, c: Collection, simulated, n: int, m: int):
        self.collection = c
        self.simulated = simulated
        self.n = n
        self.m = m
        self.simulators: dict[int, SimulatorState] = {}
        self.instances: dict[str, InstanceInfo] = {}
        self.violations: list[str] = []

    def validate(self, m: int) -> None:
        if m != self.m:
            raise ValueError(f"built for {self.m} simulators, not {m}")

    @staticmethod
    def prefix(key: tuple) -> str:
        return "bg/" + "/".join(str(k) for k in key) + "/"

    # board handling

    def merge(self, board: tuple) -> list[SimState | None]:
        latest: list[SimState | None] = [None] * self.n
        for cell in board:
            if cell is None:
                continue
            for p, est in enumerate(cell):
                if est is None:
                    continue
                cur = latest[p]
                if cur is None or est.pos > cur.pos:
                    latest[p] = est
                elif est.pos == cur.pos and est != cur:
                    self.violations.append(f"simulated p{p} diverges at step {est.pos}")
        return latest

    def replay(self, st: SimState):
        """Next simulated operation of ``st``, or ``None`` if the program returned."""
        prog = self.simulated.program(st.pid, st.input)
        try:
            op = next(prog)
            for res in st.results:
                while op is PARK:
                    op = prog.send(None)
                op = prog.send(res)
            # a failed busy-wait check is not a shared step
            while op is PARK:
                op = prog.send(None)
        except StopIteration as stop:
            return None, stop.value
        return op, None

    def program(self, q: int, value: Any) -> Program:
        me = self.simulators[q] = SimulatorState(q, value, estimates=[None] * self.n)
        n = self.n
        while True:
            board = yield Snapshot(BOARD)
            latest = self.merge(board)
            done = [s for s in latest if s is not None and s.decided]
            if done:
                me.output = done[0].decision
                return me.output
            p = me.cursor
            me.cursor = (me.cursor + 1) % n
            st = latest[p]
            if st is None:
                out = yield from self._agree(me, ("input", p, 0), 1, me.input, (1, 1))
                if out is PARK:
                    continue
                new = self._settle(SimState(p, 1, out))
            else:
                op, _ = self.replay(st)
                if isinstance(op, Update):
                    memory = dict(st.memory)
                    memory[op.obj] = op.value
                    new = self._settle(
                        replace(st, pos=st.pos + 1, results=st.results + (None,),
                                memory=tuple(sorted(memory.items())))
                    )
                elif isinstance(op, Snapshot):
                    view = tuple(s.read(op.obj) if s is not None else None for s in latest)
                    key = ("snapshot", p, st.pos)
                    out = yield from self._agree(me, key, 1, view, (1, 1))
                    if out is PARK:
                        continue
                    new = self._settle(replace(st, pos=st.pos + 1, results=st.results + (out,)))
                elif isinstance(op, Propose):
                    spec = op.spec
                    if op.obj not in me.sc_value:
                        out = yield from self._agree(
                            me, ("sc-value", op.obj), spec.j, op.value, (spec.ell, spec.j)
                        )
                        if out is PARK:
                            continue
                        me.sc_value[op.obj] = out
                    key = ("sc-outcome", p, st.pos)
                    out = yield from self._agree(me, key, 1, me.sc_value[op.obj], (1, 1))
                    if out is PARK:
                        continue
                    new = self._settle(
                        replace(st, pos=st.pos + 1, results=st.results + (out,),
                                accesses=st.accesses + ((op.obj, op.value, out),))
                    )
                else:
                    raise TypeError(f"cannot simulate {op!r}")
            latest[p] = new
            me.estimates = list(latest)
            yield Update(BOARD, tuple(latest))
            if new.decided:
                me.output = new.decision
                return me.output

    def _settle(self, st: SimState) -> SimState:
        op, decision = self.replay(st)
        if op is None:
            return replace(st, pos=st.pos + 1, decided=True, decision=decision)
        return st

    def _agree(self, me: SimulatorState, key: tuple, param: int, proposal, tag):
        """Drive agreement ``key`` until it decides (value) or parks (PARK)."""
        if key in me.agreed:
            return me.agreed[key]
        att = me.parked.pop(key, None)
        if att is None:
            prefix = self.prefix(key)
            self.instances.setdefault(prefix, InstanceInfo(key, param, tag))
            state = LAgreementState(param)
            prog = l_agreement(prefix, param, proposal, state)
            att = Attempt(key, param, prog, state, next(prog))
        while True:
            res = yield att.op
            try:
                att.op = att.program.send(res)
            except StopIteration as stop:
                me.agreed[key] = stop.value
                return stop.value
            if att.op is PARK:
                att.op = next(att.program)
                me.parked[key] = att
                return PARK


@dataclass
class BGResult:
    world: World
    protocol: BGProtocol
    sim_inputs: tuple

    @property
    def trace(self) -> Trace:
        return self.world.trace

    @property
    def outputs(self) -> dict[int, Any]:
        return self.world.trace.decisions()

    @property
    def crashed(self) -> set[int]:
        return self.world.trace.crashed()

    def published(self) -> list[SimState]:
        """Every simulated state ever written to the board, in trace order."""
        out = []
        for e in self.world.trace.of_kind("update"):
            if e.obj == BOARD:
                out.extend(s for s in e.payload if s is not None)
        return out

    def simulated_decisions(self) -> dict[int, Any]:
        out = {}
        for s in self.published():
            if s.decided:
                out.setdefault(s.pid, s.decision)
        return dict(sorted(out.items()))

    def inventory(self) -> list[tuple[int, int]]:
        return blocked_inventory(self.world, self.protocol)


def blocked_inventory(world: World, protocol: BGProtocol) -> list[tuple[int, int]]:
    """(t, s) tags of undecided agreements held up by enough mid-protocol crashes."""
    crashed = [p for p, s in world.slots.items() if s.status is Status.CRASHED]
    out = []
    for prefix in sorted(protocol.instances):
        info = protocol.instances[prefix]
        A = world.snapshots.get(prefix + "A")
        B = world.snapshots.get(prefix + "B")
        if A is None:
            continue
        stalled = [q for q in crashed if A.cells[q] is not None and (B is None or B.cells[q] is None)]
        if len(stalled) < info.param:
            continue
        if any(info.key in sim.agreed for sim in protocol.simulators.values()):
            continue
        out.append(info.tag)
    return sorted(out)


def bg_run(
    c: Collection,
    n: int,
    m: int,
    sim_inputs: Sequence[Any],
    sim_schedule: Schedule | None = None,
    simulated=None,
    **world_kw,
) -> BGResult:
    """Run ``m`` simulators on ``simulated`` (default: the static protocol for ``n``)."""
    if m < 1:
        raise ValueError("need at least one simulator")
    if len(sim_inputs) != m:
        raise ValueError(f"expected {m} simulator inputs, got {len(sim_inputs)}")
    simulated = simulated if simulated is not None else build_static(c, n)
    proto = BGProtocol(c, simulated, n, m)
    programs: dict[int, Callable[[], Program]] = {
        q: (lambda q=q, v=v: proto.program(q, v)) for q, v in enumerate(sim_inputs)
    }
    world = World(m, programs, sim_schedule, **world_kw)
    world.run(strict=False)
    return BGResult(world, proto, tuple(sim_inputs))


def progress_bound(c: Collection, n: int) -> int:
    """Crash count below which some simulated process must decide."""
    return al(c, n)
