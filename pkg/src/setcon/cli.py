"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 the run did
not terminate within its budget (or stalled) with correct processes
undecided.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .bg import bg_run
from .calculus import CollectionError, agreement_table, al, complete, parse_collection, scn, witness
from .protocols import AdaptiveProtocol, LAgreement, parse_protocol
from .runtime import CapacityFault, NonTermination, Schedule, new_world, record_and_validate_capacity
from .sweeps import StressConfig, stress
from .verify import (
    CheckReport,
    check_adaptive_optimality,
    check_bg_consistency,
    check_bg_objects,
    check_bg_progress,
    check_k_set_consensus,
    check_l_agreement,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONTERM = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    collection: str | None = None
    n: int | None = None
    protocol: str | None = None
    inputs: list[Any] = field(default_factory=list)
    schedule: Schedule = field(default_factory=Schedule)
    policy: str = "adversarial"
    checks: list[str] = field(default_factory=list)
    budget: int | None = None
    trace_path: Path | None = None


# -- argument helpers -----------------------------------------------------------


def _value(token: str) -> Any:
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token


def parse_inputs(text: str | None, n: int) -> list[Any]:
    """``1..9``, ``3,5,7`` or ``a@p0,b@p1``; missing positions stay ``None`` (bottom)."""
    if not text:
        return list(range(1, n + 1))
    out: list[Any] = [None] * n
    if ".." in text and "," not in text:
        lo, hi = (int(x) for x in text.split(".."))
        values = list(range(lo, hi + 1))
        if len(values) > n:
            raise UsageError(f"{len(values)} inputs for {n} processes")
        out[: len(values)] = values
    elif "@" in text:
        for item in text.split(","):
            value, _, where = item.partition("@")
            if not where.startswith("p"):
                raise UsageError(f"bad input assignment {item!r}")
            pid = int(where[1:])
            if not 0 <= pid < n:
                raise UsageError(f"process {pid} outside 0..{n - 1}")
            out[pid] = _value(value)
    else:
        values = [_value(v) for v in text.split(",")]
        if len(values) > n:
            raise UsageError(f"{len(values)} inputs for {n} processes")
        out[: len(values)] = values
    kinds = {type(v) for v in out if v is not None}
    if len(kinds) > 1:
        raise UsageError("inputs must be all integers or all strings")
    return out


def parse_crashes(text: str | None) -> dict[int, int]:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        proc, sep, step = item.partition(":")
        if not sep:
            raise UsageError(f"bad crash {item!r}, expected proc:step")
        out[int(proc)] = int(step)
    return out


def build_schedule(args) -> Schedule:
    crashes = parse_crashes(args.crash)
    policy = args.schedule
    if policy is None:
        policy = "random" if args.seed is not None else "round-robin"
    seed = args.seed or 0
    if policy.startswith("scripted"):
        _, _, ids = policy.partition(":")
        script = tuple(int(x) for x in ids.split(",") if x)
        return Schedule("scripted", seed, script, crashes)
    if policy not in ("round-robin", "random"):
        raise UsageError(f"unknown schedule {policy!r}")
    return Schedule(policy, seed, (), crashes)


def _budget(args) -> int | None:
    if getattr(args, "budget", None) is not None:
        return args.budget
    env = os.environ.get("SETCON_BUDGET")
    return int(env) if env else None


# -- calculus commands ----------------------------------------------------------


def cmd_al(args) -> int:
    print(al(parse_collection(args.collection), args.n))
    return EXIT_OK


def cmd_table(args) -> int:
    sys.stdout.write(agreement_table(parse_collection(args.collection), args.n).to_tsv())
    return EXIT_OK


def cmd_scn(args) -> int:
    print(scn(parse_collection(args.collection), args.j))
    return EXIT_OK


def cmd_witness(args) -> int:
    print(witness(parse_collection(args.collection), args.n))
    return EXIT_OK


def cmd_complete(args) -> int:
    print(",".join(str(s) for s in complete(parse_collection(args.collection), args.n)))
    return EXIT_OK


# -- run ------------------------------------------------------------------------


def _default_checks(proto, collection, n) -> list[str]:
    if isinstance(proto, LAgreement):
        return [f"lagree:{proto.l}"]
    if isinstance(proto, AdaptiveProtocol):
        return ["adaptive"]
    return [f"kset:{al(collection, n)}"]


def run_checks(checks, world, inputs, collection) -> list[CheckReport]:
    reports = []
    for spec in checks:
        name, _, arg = spec.partition(":")
        if name == "kset":
            reports.append(check_k_set_consensus(inputs, world.trace, int(arg)))
        elif name == "lagree":
            reports.append(check_l_agreement(world.trace, int(arg), inputs))
        elif name == "adaptive":
            if collection is None:
                raise UsageError("check 'adaptive' needs --collection")
            parts = [p for p, v in enumerate(inputs) if v is not None]
            reports.append(check_adaptive_optimality(collection, world.trace, parts, inputs))
        elif name == "capacity":
            cap = record_and_validate_capacity(world)
            counts = {k: f"{a}/{ell}" for k, (a, ell) in cap.counts.items()}
            reports.append(CheckReport("capacity", "fail" if cap.violations else "pass",
                                       cap.violations, {"objects": counts}))
        else:
            raise UsageError(f"unknown check {spec!r}")
    return reports


def cmd_run(args) -> int:
    collection = parse_collection(args.collection) if args.collection else None
    try:
        proto = parse_protocol(args.protocol, collection, args.n)
    except ValueError as err:
        raise UsageError(str(err)) from err
    inputs = parse_inputs(args.inputs, args.n)
    sched = build_schedule(args)
    world = new_world(args.n, proto, inputs, sched, object_policy=args.policy, budget=_budget(args))
    try:
        world.run(strict=True)
        nonterm = None
    except NonTermination as err:
        nonterm = err
    except CapacityFault as err:
        print(f"capacity fault: {err}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        if args.trace:
            world.trace.write(args.trace)
    checks = args.check or _default_checks(proto, collection, args.n)
    reports = run_checks(checks, world, inputs, collection)
    for r in reports:
        print(r.to_tsv())
    if nonterm is not None:
        print(str(nonterm), file=sys.stderr)
        return EXIT_NONTERM
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# -- bg-sim ---------------------------------------------------------------------


def cmd_bg_sim(args) -> int:
    c = parse_collection(args.collection)
    inputs = parse_inputs(args.inputs, args.simulators)
    if any(v is None for v in inputs):
        raise UsageError("every simulator needs an input")
    sched = build_schedule(args)
    res = bg_run(c, args.n, args.simulators, inputs, sched, budget=_budget(args))
    if args.trace:
        res.trace.write(args.trace)
    out = ["simulated\tdecision"]
    out += [f"{p}\t{v}" for p, v in res.simulated_decisions().items()]
    out += ["", "simulator\toutput"]
    out += [f"{q}\t{v}" for q, v in sorted(res.outputs.items())]
    out += ["", "t\ts"]
    out += [f"{t}\t{s}" for t, s in res.inventory()]
    print("\n".join(out))
    reports = [check_bg_progress(c, args.n, res), check_bg_consistency(res), check_bg_objects(res)]
    for r in reports:
        print(r.to_tsv(), file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# -- stress ---------------------------------------------------------------------


def cmd_stress(args) -> int:
    cfg = StressConfig(
        protocol=args.protocol,
        n=args.n,
        collection=args.collection,
        participants=args.participants,
        simulators=args.simulators,
        seeds=range(args.seed_start, args.seed_start + args.seeds),
        crashes=args.crashes,
        same_instance=args.same_instance,
        policy=args.policy,
        stagger=args.stagger,
        budget=_budget(args),
    )
    if cfg.protocol != "bg-sim":
        try:
            parse_protocol(cfg.protocol, cfg.collection, cfg.n)
        except ValueError as err:
            raise UsageError(str(err)) from err
    elif not cfg.collection:
        raise UsageError("bg-sim stress needs --collection")
    summary = stress(cfg)
    print(summary.header())
    if summary.runs:
        print(summary.row())
    if summary.failures:
        dump = Path(args.dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        for out in summary.failures:
            path = dump / f"{cfg.protocol.replace(':', '_')}-seed{out.seed}.trace"
            out.world.trace.write(path)
            for r in out.reports:
                if not r.passed:
                    print(f"seed {out.seed}: {r.to_tsv()} (trace {path})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="setcon", description="Set-consensus collections: power and protocols.")
    sub = ap.add_subparsers(dest="command", required=True)

    def calc(name, func, param="n"):
        p = sub.add_parser(name)
        p.add_argument("--collection", required=True)
        p.add_argument(f"--{param}", type=int, required=True)
        p.set_defaults(func=func)
        return p

    calc("al", cmd_al)
    calc("table", cmd_table)
    calc("scn", cmd_scn, "j")
    calc("witness", cmd_witness)
    calc("complete", cmd_complete)

    def sched_args(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--schedule", help="round-robin | random | scripted:0,1,2")
        p.add_argument("--crash", help="proc:step,...")
        p.add_argument("--budget", type=int)
        p.add_argument("--trace", type=Path, help="write the trace here")

    run = sub.add_parser("run")
    run.add_argument("--protocol", required=True)
    run.add_argument("--collection")
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--inputs")
    run.add_argument("--policy", default="adversarial", choices=["adversarial", "first-wins"])
    run.add_argument("--check", action="append", help="kset:K | lagree:L | adaptive | capacity")
    sched_args(run)
    run.set_defaults(func=cmd_run)

    bg = sub.add_parser("bg-sim")
    bg.add_argument("--collection", required=True)
    bg.add_argument("--n", type=int, required=True)
    bg.add_argument("--simulators", type=int, required=True)
    bg.add_argument("--inputs")
    sched_args(bg)
    bg.set_defaults(func=cmd_bg_sim)

    st = sub.add_parser("stress")
    st.add_argument("--protocol", required=True, help="static | adaptive | l-agreement:K | bg-sim")
    st.add_argument("--collection")
    st.add_argument("--n", type=int, required=True)
    st.add_argument("--participants", type=int)
    st.add_argument("--simulators", type=int, default=1)
    st.add_argument("--seeds", type=int, default=100, help="number of seeds")
    st.add_argument("--seed-start", type=int, default=0)
    st.add_argument("--crashes", type=int, default=0)
    st.add_argument("--same-instance", action="store_true")
    st.add_argument("--stagger", type=int, default=0)
    st.add_argument("--policy", default="adversarial", choices=["adversarial", "first-wins"])
    st.add_argument("--budget", type=int)
    st.add_argument("--dump-dir", default="stress-failures")
    st.set_defaults(func=cmd_stress)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, CollectionError, ValueError) as err:
        print(f"setcon {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
