"""Deterministic shared-memory world for asynchronous protocols.

Process programs are generators.  They yield one shared operation at a
time (:class:`Update`, :class:`Snapshot`, :class:`Propose`) and receive
its result; the value they ``return`` is their decision.  A program may
also yield :data:`PARK` to signal that a busy-wait check failed; the
world treats it as a no-op, while an outer program driving a nested one
can use it to switch to other work.

One scheduler event is one shared operation, a decision, or a crash.
A set-consensus propose takes two events (invocation and response), so
the object sees concurrent pending proposals.
"""

from __future__ import annotations

import enum
import os
import random
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any, Callable, Generator, Iterable, Sequence

from .calculus import ObjectSpec

__all__ = [
    "PARK",
    "CapacityFault",
    "Event",
    "NonTermination",
    "Op",
    "ProcessSlot",
    "Propose",
    "Schedule",
    "SetConsensusObject",
    "Snapshot",
    "SnapshotObject",
    "Status",
    "Trace",
    "Update",
    "World",
    "new_world",
    "record_and_validate_capacity",
    "render",
    "sc_propose",
]

DEFAULT_BUDGET = 10**6
DEFAULT_STALL_STEPS = 1000


def default_budget() -> int:
    env = os.environ.get("SETCON_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


# -- operations ---------------------------------------------------------------


@dataclass(frozen=True)
class Update:
    obj: str
    value: Any


@dataclass(frozen=True)
class Snapshot:
    obj: str


@dataclass(frozen=True)
class Propose:
    obj: str
    spec: ObjectSpec
    value: Any


Op = Update | Snapshot | Propose


class _Park:
    def __repr__(self) -> str:
        return "PARK"


PARK = _Park()

Program = Generator[Any, Any, Any]


# -- shared objects -----------------------------------------------------------


class SnapshotObject:
    def __init__(self, size: int):
        self.cells: list[Any] = [None] * size
        self.versions: list[int] = [0] * size

    def update(self, pid: int, value: Any) -> None:
        self.cells[pid] = value
        self.versions[pid] += 1

    def snapshot(self) -> tuple:
        return tuple(self.cells)


class CapacityFault(RuntimeError):
    def __init__(self, message: str, world: "World | None" = None):
        super().__init__(message)
        self.world = world


class SetConsensusObject:
    """One (ell, j)-set-consensus instance with an explicit decision policy.

    ``adversarial`` lets a seeded coin grow the decided set up to ``j``
    values (favouring the caller's own proposal), ``first-wins`` behaves
    like consensus on the first invocation.
    """

    POLICIES = ("adversarial", "first-wins")

    def __init__(self, name: str, spec: ObjectSpec, policy: str = "adversarial", seed: int = 0):
        if policy not in self.POLICIES:
            raise ValueError(f"unknown object policy {policy!r}")
        self.name = name
        self.spec = spec
        self.policy = policy
        self.rng = random.Random(f"{seed}/{name}")
        self.accessors: list[int] = []
        self.proposals: list[tuple[int, Any]] = []
        self.decided: list[Any] = []
        self.returned: dict[int, Any] = {}

    def invoke(self, pid: int, value: Any, strict: bool = True) -> None:
        if pid in self.returned or pid in self.accessors:
            raise CapacityFault(f"{pid} proposes twice to {self.name}")
        self.accessors.append(pid)
        self.proposals.append((pid, value))
        if strict and len(self.accessors) > self.spec.ell:
            raise CapacityFault(
                f"object {self.name} ({self.spec}) accessed by {len(self.accessors)} processes"
            )

    def respond(self, pid: int) -> Any:
        value = next(v for p, v in self.proposals if p == pid)
        if self.policy == "first-wins":
            if not self.decided:
                self.decided.append(self.proposals[0][1])
            out = self.decided[0]
        else:
            out = self._adversarial(value)
        self.returned[pid] = out
        return out

    def _adversarial(self, value: Any) -> Any:
        room = len(self.decided) < self.spec.j
        if not self.decided or (room and self.rng.random() < 0.7):
            if value not in self.decided:
                self.decided.append(value)
                return value
            pending = [v for _, v in self.proposals if v not in self.decided]
            if pending and room:
                pick = self.rng.choice(pending)
                self.decided.append(pick)
                return pick
        return self.rng.choice(self.decided)


def sc_propose(obj: SetConsensusObject, pid: int, value: Any) -> Any:
    """Invoke and immediately complete a propose (no concurrency window)."""
    obj.invoke(pid, value)
    return obj.respond(pid)


# -- processes, schedules, traces ----------------------------------------------


class Status(enum.Enum):
    NOT_STARTED = "not-started"
    RUNNING = "running"
    DECIDED = "decided"
    CRASHED = "crashed"


@dataclass
class ProcessSlot:
    id: int
    status: Status = Status.NOT_STARTED
    step_count: int = 0
    decision: Any = None
    program: Program | None = field(default=None, repr=False)
    pending: Any = field(default=None, repr=False)
    invoked: bool = False
    finished: bool = False

    @property
    def terminal(self) -> bool:
        return self.status in (Status.DECIDED, Status.CRASHED)


@dataclass
class Schedule:
    """Who moves next, and who crashes when.

    ``crashes`` maps a process to the number of its own events after which
    it halts for good.  ``arrivals`` maps a process to the global event
    index before which it may not move (staggered start).
    """

    policy: str = "round-robin"
    seed: int = 0
    script: tuple[int, ...] = ()
    crashes: dict[int, int] = field(default_factory=dict)
    arrivals: dict[int, int] = field(default_factory=dict)

    POLICIES = ("round-robin", "random", "scripted")

    def __post_init__(self):
        if self.policy not in self.POLICIES:
            raise ValueError(f"unknown schedule policy {self.policy!r}")
        self.script = tuple(self.script)
        self.crashes = dict(self.crashes)
        self.arrivals = dict(self.arrivals)

    @classmethod
    def seeded(cls, seed: int, **kw) -> "Schedule":
        return cls(policy="random", seed=seed, **kw)

    def validate(self, n: int) -> None:
        for pid in [*self.script, *self.crashes, *self.arrivals]:
            if not 0 <= pid < n:
                raise ValueError(f"schedule references process {pid} outside 0..{n - 1}")


KINDS = ("update", "snapshot", "sc-propose", "sc-return", "decide", "crash")


@dataclass(frozen=True)
class Event:
    step: int
    proc: int
    kind: str
    obj: str | None
    payload: Any = None
    versions: tuple[int, ...] | None = field(default=None, compare=False, repr=False)

    def to_tsv(self) -> str:
        return "\t".join(
            [str(self.step), str(self.proc), self.kind, self.obj or "-", render(self.payload)]
        )


def render(x: Any) -> str:
    """Deterministic, diff-able text for trace payloads."""
    if x is None:
        return "_"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, str)):
        return str(x)
    if isinstance(x, enum.Enum):
        return str(x.value)
    if isinstance(x, (tuple, list)):
        return "[" + ",".join(render(v) for v in x) + "]"
    if isinstance(x, (set, frozenset)):
        return "{" + ",".join(sorted(render(v) for v in x)) + "}"
    if isinstance(x, dict):
        items = sorted((render(k), render(v)) for k, v in x.items())
        return "{" + ",".join(f"{k}:{v}" for k, v in items) + "}"
    if is_dataclass(x):
        body = ",".join(f"{f.name}={render(getattr(x, f.name))}" for f in fields(x))
        return f"{type(x).__name__}({body})"
    return repr(x)


class Trace:
    def __init__(self, events: Iterable[Event] = ()):
        self.events: list[Event] = list(events)

    def append(self, event: Event) -> None:
        self.events.append(event)

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, *kinds: str) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    def decisions(self) -> dict[int, Any]:
        return {e.proc: e.payload for e in self.events if e.kind == "decide"}

    def crashed(self) -> set[int]:
        return {e.proc for e in self.events if e.kind == "crash"}

    def by_process(self, pid: int) -> list[Event]:
        return [e for e in self.events if e.proc == pid]

    def to_tsv(self) -> str:
        return "".join(e.to_tsv() + "\n" for e in self.events)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_tsv())


class NonTermination(RuntimeError):
    """The run stopped (budget or stall) while correct processes were undecided."""

    def __init__(self, world: "World"):
        undecided = world.undecided()
        super().__init__(
            f"potential non-termination ({world.outcome}) after {world.clock} events; "
            f"undecided correct processes: {undecided}"
        )
        self.world = world
        self.trace = world.trace
        self.undecided = undecided


# -- the world ----------------------------------------------------------------


class World:
    """A single-threaded run of ``n`` processes over lazily created shared objects.

    ``outcome`` becomes ``"complete"`` when every participant decided or
    crashed, ``"budget"`` when ``budget`` events were spent, and
    ``"stalled"`` when every live process has taken ``stall_steps`` events
    since the last write to shared state (a busy-wait that cannot end).
    """

    def __init__(
        self,
        n: int,
        programs: dict[int, Callable[[], Program]],
        schedule: Schedule | None = None,
        *,
        object_policy: str = "adversarial",
        object_seed: int | None = None,
        budget: int | None = None,
        stall_steps: int | None = DEFAULT_STALL_STEPS,
        strict_capacity: bool = True,
        crash_hook: Callable[["World", Event], Iterable[int]] | None = None,
    ):
        if n < 1:
            raise ValueError("world needs at least one process")
        self.n = n
        self.schedule = schedule or Schedule()
        self.schedule.validate(n)
        self.crash_at = dict(self.schedule.crashes)
        self.object_policy = object_policy
        self.object_seed = self.schedule.seed if object_seed is None else object_seed
        self.budget = default_budget() if budget is None else budget
        self.stall_steps = stall_steps
        self.strict_capacity = strict_capacity
        self.crash_hook = crash_hook
        self.slots = {pid: ProcessSlot(pid) for pid in sorted(programs)}
        self._factories = dict(programs)
        self.snapshots: dict[str, SnapshotObject] = {}
        self.sc_objects: dict[str, SetConsensusObject] = {}
        self.trace = Trace()
        self.clock = 0
        self.outcome: str | None = None
        self._rng = random.Random(f"schedule/{self.schedule.seed}")
        self._script = list(self.schedule.script)
        self._rr = -1
        self._idle = {pid: 0 for pid in self.slots}

    # objects

    def snapshot_object(self, name: str) -> SnapshotObject:
        obj = self.snapshots.get(name)
        if obj is None:
            obj = self.snapshots[name] = SnapshotObject(self.n)
        return obj

    def sc_object(self, name: str, spec: ObjectSpec) -> SetConsensusObject:
        obj = self.sc_objects.get(name)
        if obj is None:
            obj = self.sc_objects[name] = SetConsensusObject(
                name, spec, self.object_policy, self.object_seed
            )
        elif obj.spec != spec:
            raise CapacityFault(f"object {name} used as {spec} and {obj.spec}", self)
        return obj

    # scheduling

    @property
    def participants(self) -> list[int]:
        return list(self.slots)

    def undecided(self) -> list[int]:
        return [p for p, s in self.slots.items() if not s.terminal]

    def _runnable(self) -> list[int]:
        live = [p for p, s in self.slots.items() if not s.terminal]
        if not live:
            return []
        arrivals = self.schedule.arrivals
        ready = [p for p in live if arrivals.get(p, 0) <= self.clock]
        if not ready:
            # nobody has arrived yet: fast-forward to the next arrival
            first = min(arrivals.get(p, 0) for p in live)
            ready = [p for p in live if arrivals.get(p, 0) == first]
        return ready

    def _pick(self) -> int | None:
        runnable = self._runnable()
        if not runnable:
            return None
        while self._script:
            pid = self._script.pop(0)
            if pid in runnable:
                return pid
        if self.schedule.policy == "random":
            return self._rng.choice(runnable)
        order = sorted(runnable)
        nxt = next((p for p in order if p > self._rr), order[0])
        self._rr = nxt
        return nxt

    def _stalled(self) -> bool:
        if self.stall_steps is None:
            return False
        live = [p for p, s in self.slots.items() if not s.terminal]
        return bool(live) and all(self._idle[p] >= self.stall_steps for p in live)

    # execution

    def step(self) -> Event | None:
        """Run one scheduler event; ``None`` once the world is quiescent."""
        if self.outcome is not None:
            return None
        if self.clock >= self.budget:
            self.outcome = "budget"
            return None
        if self._stalled():
            self.outcome = "stalled"
            return None
        pid = self._pick()
        if pid is None:
            self.outcome = "complete"
            return None
        slot = self.slots[pid]
        if self.crash_at.get(pid) == slot.step_count:
            slot.status = Status.CRASHED
            event = self._emit(pid, "crash", None, None)
            self._touch()
        else:
            if slot.status is Status.NOT_STARTED:
                slot.status = Status.RUNNING
                slot.program = self._factories[pid]()
                self._advance(slot, None, first=True)
            if slot.finished:
                slot.status = Status.DECIDED
                event = self._emit(pid, "decide", None, slot.decision)
                self._touch()
            else:
                event = self._execute(slot)
        slot.step_count += 1
        if self.crash_hook is not None:
            for victim in self.crash_hook(self, event):
                v = self.slots[victim]
                if not v.terminal and victim not in self.crash_at:
                    self.crash_at[victim] = v.step_count
        return event

    def run(self, strict: bool = True) -> Trace:
        while self.step() is not None:
            pass
        if strict and self.outcome != "complete" and self.undecided():
            raise NonTermination(self)
        return self.trace

    def _emit(self, pid, kind, obj, payload, versions=None) -> Event:
        event = Event(self.clock, pid, kind, obj, payload, versions)
        self.trace.append(event)
        self.clock += 1
        self._idle[pid] += 1
        return event

    def _touch(self) -> None:
        for p in self._idle:
            self._idle[p] = 0

    def _advance(self, slot: ProcessSlot, result: Any, first: bool = False) -> None:
        try:
            op = next(slot.program) if first else slot.program.send(result)
            while op is PARK:
                op = slot.program.send(None)
        except StopIteration as stop:
            slot.finished = True
            slot.decision = stop.value
            slot.pending = None
            return
        if not isinstance(op, (Update, Snapshot, Propose)):
            raise TypeError(f"process {slot.id} yielded {op!r}, not a shared operation")
        slot.pending = op

    def _execute(self, slot: ProcessSlot) -> Event:
        op, pid = slot.pending, slot.id
        if isinstance(op, Update):
            self.snapshot_object(op.obj).update(pid, op.value)
            event = self._emit(pid, "update", op.obj, op.value)
            self._touch()
            self._advance(slot, None)
        elif isinstance(op, Snapshot):
            obj = self.snapshot_object(op.obj)
            view = obj.snapshot()
            event = self._emit(pid, "snapshot", op.obj, view, tuple(obj.versions))
            self._advance(slot, view)
        elif not slot.invoked:
            obj = self.sc_object(op.obj, op.spec)
            slot.invoked = True
            try:
                obj.invoke(pid, op.value, strict=self.strict_capacity)
            except CapacityFault as fault:
                self._emit(pid, "sc-propose", op.obj, op.value)
                fault.world = self
                raise
            event = self._emit(pid, "sc-propose", op.obj, op.value)
            self._touch()
        else:
            out = self.sc_objects[op.obj].respond(pid)
            slot.invoked = False
            event = self._emit(pid, "sc-return", op.obj, out)
            self._touch()
            self._advance(slot, out)
        return event


def new_world(
    n: int,
    protocol,
    inputs: Sequence[Any],
    schedule: Schedule | None = None,
    **kw,
) -> World:
    """World running ``protocol`` on every process with a non-``None`` input."""
    if len(inputs) != n:
        raise ValueError(f"expected {n} inputs, got {len(inputs)}")
    protocol.validate(n)
    programs = {
        pid: (lambda pid=pid, v=v: protocol.program(pid, v))
        for pid, v in enumerate(inputs)
        if v is not None
    }
    return World(n, programs, schedule, **kw)


@dataclass
class CapacityReport:
    counts: dict[str, tuple[int, int]]  # object -> (accessors, ell)
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def record_and_validate_capacity(world: World) -> CapacityReport:
    accessors: dict[str, set[int]] = {}
    for e in world.trace.of_kind("sc-propose"):
        accessors.setdefault(e.obj, set()).add(e.proc)
    counts, violations = {}, []
    for name in sorted(accessors):
        ell = world.sc_objects[name].spec.ell
        counts[name] = (len(accessors[name]), ell)
        if len(accessors[name]) > ell:
            violations.append(f"{name}: {len(accessors[name])} accessors > {ell}")
    return CapacityReport(counts, violations)
