"""Trace and output validators.

Each check is a pure function of its arguments and returns a
:class:`CheckReport`; a failing report always names at least one
witness (a violating value, process, or instance).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .calculus import Collection, al
from .runtime import Propose, Trace, render

__all__ = [
    "CheckReport",
    "check_adaptive_optimality",
    "check_bg_consistency",
    "check_bg_objects",
    "check_bg_progress",
    "check_k_set_consensus",
    "check_l_agreement",
    "stalled_mid_protocol",
]


@dataclass
class CheckReport:
    name: str
    verdict: str
    witnesses: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "fail" and not self.witnesses:
            raise ValueError("a failing report needs a witness")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_tsv(self) -> str:
        cols = [self.name, self.verdict] + [f"{k}={render(v)}" for k, v in self.stats.items()]
        if self.witnesses:
            cols.append("witnesses=" + ";".join(str(w) for w in self.witnesses))
        return "\t".join(cols)


def _report(name: str, witnesses: list, stats: dict) -> CheckReport:
    return CheckReport(name, "fail" if witnesses else "pass", witnesses, stats)


def _decision_stats(trace: Trace) -> tuple[dict[int, Any], set[int], list]:
    decisions = trace.decisions()
    crashed = trace.crashed()
    distinct = sorted(set(decisions.values()))
    return decisions, crashed, distinct


def check_k_set_consensus(inputs: Sequence[Any], trace: Trace, k: int) -> CheckReport:
    """Validity, k-agreement and termination of every correct participant."""
    decisions, crashed, distinct = _decision_stats(trace)
    proposed = {v for v in inputs if v is not None}
    bad = []
    for p, v in sorted(decisions.items()):
        if v not in proposed:
            bad.append(f"p{p} decided unproposed {render(v)}")
    if len(distinct) > k:
        bad.append(f"{len(distinct)} distinct decisions {render(distinct)} > {k}")
    for p, v in enumerate(inputs):
        if v is not None and p not in decisions and p not in crashed:
            bad.append(f"correct p{p} undecided")
    stats = {"k": k, "distinct": len(distinct), "deciders": len(decisions), "crashes": len(crashed)}
    return _report(f"kset:{k}", bad, stats)


def stalled_mid_protocol(trace: Trace, a_object: str = "A", b_object: str = "B") -> set[int]:
    """Crashed processes that updated ``a_object`` but never ``b_object``."""
    wrote_a = {e.proc for e in trace if e.kind == "update" and e.obj == a_object}
    wrote_b = {e.proc for e in trace if e.kind == "update" and e.obj == b_object}
    return (wrote_a - wrote_b) & trace.crashed()


def check_l_agreement(
    trace: Trace,
    l: int,
    inputs: Sequence[Any] | None = None,
    a_object: str = "A",
    b_object: str = "B",
) -> CheckReport:
    """Validity, at most ``l`` values, and termination unless ``l`` participants stalled.

    Without ``inputs``, proposals are read from the updates of ``a_object``.
    """
    decisions, crashed, distinct = _decision_stats(trace)
    if inputs is not None:
        proposed = {v for v in inputs if v is not None}
        participants = {p for p, v in enumerate(inputs) if v is not None}
    else:
        writes = [e for e in trace if e.kind == "update" and e.obj == a_object]
        proposed = {e.payload for e in writes}
        participants = {e.proc for e in trace}
    stalled = stalled_mid_protocol(trace, a_object, b_object)
    bad = []
    for p, v in sorted(decisions.items()):
        if v not in proposed:
            bad.append(f"p{p} decided unproposed {render(v)}")
    if len(distinct) > l:
        bad.append(f"{len(distinct)} distinct decisions {render(distinct)} > {l}")
    live_required = len(stalled) < l
    if live_required:
        for p in sorted(participants - crashed - set(decisions)):
            bad.append(f"correct p{p} undecided with {len(stalled)} < {l} stalled")
    stats = {
        "l": l,
        "distinct": len(distinct),
        "deciders": len(decisions),
        "crashes": len(crashed),
        "stalled": len(stalled),
        "termination_required": live_required,
    }
    return _report(f"lagree:{l}", bad, stats)


def check_adaptive_optimality(
    c: Collection,
    trace: Trace,
    participants: Iterable[int],
    inputs: Sequence[Any] | None = None,
) -> CheckReport:
    parts = set(participants)
    decisions, crashed, distinct = _decision_stats(trace)
    bound = al(c, len(parts)) if parts else 0
    bad = []
    if len(distinct) > bound:
        bad.append(f"{len(distinct)} distinct decisions {render(distinct)} > AL_{len(parts)}={bound}")
    for p in sorted(parts - crashed - set(decisions)):
        bad.append(f"correct p{p} undecided")
    if inputs is not None:
        proposed = {inputs[p] for p in parts}
        for p, v in sorted(decisions.items()):
            if v not in proposed:
                bad.append(f"p{p} decided unproposed {render(v)}")
    stats = {"participants": len(parts), "bound": bound, "distinct": len(distinct),
             "deciders": len(decisions), "crashes": len(crashed)}
    return _report("adaptive", bad, stats)


def check_bg_progress(c: Collection, n: int, result, crashed_simulators: int | None = None) -> CheckReport:
    """Some simulated process decides when fewer than AL_n simulators crashed.

    With ``f >= AL_n`` crashes a run with no simulated decision is
    reported as an informational pass.
    """
    f = len(result.crashed) if crashed_simulators is None else crashed_simulators
    bound = al(c, n)
    decided = result.simulated_decisions()
    inventory = result.inventory()
    blocked_s = sum(s for _, s in inventory)
    bad = []
    if f < bound and not decided:
        bad.append(f"no simulated decision with f={f} < AL_{n}={bound}")
    if blocked_s > f:
        bad.append(f"blocked inventory {inventory} needs {blocked_s} > {f} crashes")
    stats = {"f": f, "bound": bound, "simulated_deciders": len(decided),
             "blocked": inventory, "informational": f >= bound}
    return _report("bg-progress", bad, stats)


def check_bg_consistency(result) -> CheckReport:
    """Every simulated (process, step) was published with one state, and states extend."""
    seen: dict[tuple[int, int], Any] = {}
    bad = list(result.protocol.violations)
    for st in result.published():
        prev = seen.setdefault((st.pid, st.pos), st)
        if prev != st:
            bad.append(f"p{st.pid} step {st.pos}: two published states")
    for (pid, pos), st in sorted(seen.items()):
        before = seen.get((pid, pos - 1))
        if before is not None and st.results[: len(before.results)] != before.results:
            bad.append(f"p{pid} step {pos} does not extend step {pos - 1}")
    stats = {"states": len(seen)}
    return _report("bg-consistency", bad, stats)


def check_bg_objects(result) -> CheckReport:
    """Simulated accesses to each (t, s) object return at most s values, all proposed."""
    outcomes: dict[str, set] = {}
    proposals: dict[str, set] = {}
    specs = {}
    for st in result.published():
        for obj, _, returned in st.accesses:
            outcomes.setdefault(obj, set()).add(returned)
        if not st.decided:
            op, _ = result.protocol.replay(st)
            if isinstance(op, Propose):
                proposals.setdefault(op.obj, set()).add(op.value)
    for info in result.protocol.instances.values():
        if info.key[0] == "sc-value":
            specs[info.key[1]] = info.tag
    bad = []
    for obj in sorted(outcomes):
        t, s = specs[obj]
        if len(outcomes[obj]) > s:
            bad.append(f"{obj}: {len(outcomes[obj])} distinct outcomes > {s}")
        if not outcomes[obj] <= proposals.get(obj, set()):
            bad.append(f"{obj}: outcome not among simulated proposals")
    stats = {"objects": len(outcomes),
             "max_distinct": max((len(v) for v in outcomes.values()), default=0)}
    return _report("bg-objects", bad, stats)
