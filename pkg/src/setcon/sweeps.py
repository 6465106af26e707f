"""Seeded sweeps over schedules and crash placements.

Crashes are chosen online by :class:`WindowCrasher`, which halts a
process right after it writes the first snapshot object of an agreement
(between its two writes, where a crash can block others).  The chosen
points are recorded as ordinary ``(process, step)`` crashes in
``world.crash_at``, so a run can be replayed from a plain schedule.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable

from .bg import BGResult, bg_run
from .calculus import Collection, al, parse_collection
from .protocols import AdaptiveProtocol, LAgreement, build_static, parse_protocol
from .runtime import Event, Schedule, World, new_world
from .verify import (
    CheckReport,
    check_adaptive_optimality,
    check_bg_consistency,
    check_bg_objects,
    check_bg_progress,
    check_k_set_consensus,
    check_l_agreement,
)

__all__ = [
    "BlockingCrasher",
    "RunOutcome",
    "StressConfig",
    "StressSummary",
    "WindowCrasher",
    "run_once",
    "staggered_arrivals",
    "witness_blockers",
    "stress",
]


def is_first_write(obj: str | None) -> bool:
    return obj is not None and (obj == "A" or obj.endswith("/A"))


@dataclass
class WindowCrasher:
    """Crash up to ``max_crashes`` processes inside agreement windows.

    ``include`` restricts targets to objects with that prefix; with
    ``same_instance`` every crash after the first lands in the instance
    of the first one (the way to block an s-agreement).
    """

    max_crashes: int
    seed: int = 0
    prob: float = 0.3
    include: str = ""
    same_instance: bool = False
    placed: list[tuple[int, str]] = field(default_factory=list)
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        self.rng = random.Random(f"crash/{self.seed}")

    def __call__(self, world: World, event: Event) -> list[int]:
        if len(self.placed) >= self.max_crashes:
            return []
        if event.kind != "update" or not is_first_write(event.obj):
            return []
        if not event.obj.startswith(self.include):
            return []
        if self.same_instance and self.placed and event.obj != self.placed[0][1]:
            return []
        forced = self.same_instance and bool(self.placed)
        if not forced and self.rng.random() >= self.prob:
            return []
        self.placed.append((event.proc, event.obj))
        return [event.proc]


@dataclass
class BlockingCrasher:
    """Crash the first ``count`` writers of the first instance under each prefix.

    ``targets`` is a list of ``(prefix, count)``; e.g.
    ``[("bg/sc-value/st9/g0/", 2)]`` blocks one 2-agreement for good
    because everyone arriving later sees both crashed writers.
    """

    targets: list[tuple[str, int]]
    bound: dict[int, str] = field(default_factory=dict)
    hits: dict[int, int] = field(default_factory=dict)
    placed: list[tuple[int, str]] = field(default_factory=list)

    def __call__(self, world: World, event: Event) -> list[int]:
        if event.kind != "update" or not is_first_write(event.obj):
            return []
        if any(p == event.proc for p, _ in self.placed):
            return []
        for i, (prefix, count) in enumerate(self.targets):
            inst = self.bound.get(i)
            if inst is None:
                if not event.obj.startswith(prefix) or event.obj in self.bound.values():
                    continue
                inst = self.bound[i] = event.obj
            if event.obj == inst and self.hits.get(i, 0) < count:
                self.hits[i] = self.hits.get(i, 0) + 1
                self.placed.append((event.proc, event.obj))
                return [event.proc]
        return []


def witness_blockers(c: Collection, n: int, f: int) -> list[tuple[str, int]]:
    """Targets for :class:`BlockingCrasher` that block whole witness groups of ST_n.

    Groups are taken in order while their total disagreement fits in
    ``f``: a (t, s) group costs s crashes in the s-agreement on its
    object, a (1, 1) group one crash in its member's input agreement.
    Any crashes left over go to input agreements.  With ``f = AL_n``
    every group is blocked.
    """
    proto = build_static(c, n)
    out, budget = [], f
    for g, members in enumerate(proto.groups()):
        if g in proto.objects:
            name, spec = proto.objects[g]
            target = (f"bg/sc-value/{name}/", spec.j)
        else:
            target = (f"bg/input/{members[0]}/", 1)
        if target[1] <= budget:
            out.append(target)
            budget -= target[1]
    # spend what is left on input agreements of any simulated process
    out += [("bg/input/", 1)] * budget
    return out


def staggered_arrivals(pids, rng: random.Random, spread: int) -> dict[int, int]:
    return {p: rng.randrange(spread) for p in pids}


@dataclass
class StressConfig:
    protocol: str  # static | adaptive | l-agreement:K | bg-sim
    n: int
    collection: str | None = None
    participants: int | None = None  # adaptive / l-agreement: how many take part
    simulators: int = 1  # bg-sim
    seeds: range = range(0)
    crashes: int = 0
    same_instance: bool = False
    crash_prob: float = 0.3
    policy: str = "adversarial"
    stagger: int = 0  # max arrival delay in events, 0 = everyone at once
    budget: int | None = None
    stall_steps: int | None = 1000


@dataclass
class RunOutcome:
    seed: int
    reports: list[CheckReport]
    distinct: int
    world: World
    bg: BGResult | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


@dataclass
class StressSummary:
    config: StressConfig
    runs: int = 0
    passed: int = 0
    max_distinct: int = 0
    failures: list[RunOutcome] = field(default_factory=list)
    progress_runs: int = 0

    @property
    def failed(self) -> int:
        return self.runs - self.passed

    def header(self) -> str:
        return "protocol\tn\tparticipants\tcrashes\truns\tpass\tfail\tmax_distinct\tprogress"

    def row(self) -> str:
        c = self.config
        part = c.simulators if c.protocol == "bg-sim" else (c.participants or c.n)
        return "\t".join(
            str(x)
            for x in (c.protocol, c.n, part, c.crashes, self.runs, self.passed, self.failed,
                      self.max_distinct, self.progress_runs)
        )


def _collection(cfg: StressConfig) -> Collection | None:
    return parse_collection(cfg.collection) if cfg.collection else None


def run_once(cfg: StressConfig, seed: int, c: Collection | None = None, protocol=None) -> RunOutcome:
    """One seeded run of ``cfg`` plus the checks that fit its protocol."""
    c = c if c is not None else _collection(cfg)
    rng = random.Random(f"run/{seed}")
    crasher = (
        WindowCrasher(cfg.crashes, seed, cfg.crash_prob, same_instance=cfg.same_instance)
        if cfg.crashes
        else None
    )
    kw = dict(budget=cfg.budget, stall_steps=cfg.stall_steps, crash_hook=crasher)

    if cfg.protocol == "bg-sim":
        m = cfg.simulators
        if crasher is not None:
            crasher.include = "bg/"
        inputs = [1000 + q for q in range(m)]
        sched = Schedule.seeded(seed)
        res = bg_run(c, cfg.n, m, inputs, sched, **kw)
        k = al(c, cfg.n)
        reports = [
            check_bg_progress(c, cfg.n, res),
            check_k_set_consensus(inputs, res.trace, k) if _needs_kset(res, c, cfg.n) else
            _values_only(inputs, res, k),
            check_bg_consistency(res),
            check_bg_objects(res),
        ]
        distinct = len(set(res.outputs.values()))
        return RunOutcome(seed, reports, distinct, res.world, res)

    proto = protocol if protocol is not None else parse_protocol(cfg.protocol, c, cfg.n)
    m = cfg.participants or cfg.n
    pids = sorted(rng.sample(range(cfg.n), m))
    inputs: list[Any] = [None] * cfg.n
    for p in pids:
        inputs[p] = p + 1
    arrivals = staggered_arrivals(pids, rng, cfg.stagger) if cfg.stagger else {}
    sched = Schedule.seeded(seed, arrivals=arrivals)
    world = new_world(cfg.n, proto, inputs, sched, object_policy=cfg.policy, **kw)
    world.run(strict=False)
    if isinstance(proto, LAgreement):
        reports = [check_l_agreement(world.trace, proto.l, inputs)]
    elif isinstance(proto, AdaptiveProtocol):
        reports = [check_adaptive_optimality(c, world.trace, pids, inputs)]
    else:
        reports = [check_k_set_consensus(inputs, world.trace, al(c, cfg.n))]
    distinct = len(set(world.trace.decisions().values()))
    return RunOutcome(seed, reports, distinct, world)


def _needs_kset(res: BGResult, c: Collection, n: int) -> bool:
    # every live simulator must return only when progress is guaranteed
    return len(res.crashed) < al(c, n)


def _values_only(inputs, res: BGResult, k: int) -> CheckReport:
    report = check_k_set_consensus(inputs, res.trace, k)
    report.witnesses = [w for w in report.witnesses if "undecided" not in w]
    report.verdict = "fail" if report.witnesses else "pass"
    return report


def stress(cfg: StressConfig, on_run: Callable[[RunOutcome], None] | None = None) -> StressSummary:
    summary = StressSummary(cfg)
    c = _collection(cfg)
    proto = None
    if cfg.protocol != "bg-sim":
        proto = parse_protocol(cfg.protocol, c, cfg.n)
    for seed in cfg.seeds:
        out = run_once(cfg, seed, c, proto)
        summary.runs += 1
        summary.passed += out.passed
        summary.max_distinct = max(summary.max_distinct, out.distinct)
        if out.bg is not None and out.bg.simulated_decisions():
            summary.progress_runs += 1
        if not out.passed:
            summary.failures.append(out)
        if on_run is not None:
            on_run(out)
    return summary
