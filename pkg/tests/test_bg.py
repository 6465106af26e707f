import pytest
from hypothesis import given, settings, strategies as st

from setcon.bg import BGProtocol, SimState, bg_run, blocked_inventory
from setcon.calculus import al, parse_collection
from setcon.protocols import AdaptiveProtocol, LAgreement
from setcon.runtime import Schedule
from setcon.sweeps import BlockingCrasher, WindowCrasher, witness_blockers
from setcon.verify import (
    check_bg_consistency,
    check_bg_objects,
    check_bg_progress,
    check_k_set_consensus,
)

EXAMPLE = parse_collection("1:1,2:1,5:2")
INPUTS5 = [1000 + q for q in range(5)]


def all_checks(res, inputs, k=4):
    return [
        check_bg_progress(EXAMPLE, 9, res),
        check_k_set_consensus(inputs, res.trace, k),
        check_bg_consistency(res),
        check_bg_objects(res),
    ]


def test_single_simulator_is_a_solo_run():
    res = bg_run(EXAMPLE, 9, 1, ["x"])
    assert res.outputs == {0: "x"}
    assert res.simulated_decisions()
    assert all(r.passed for r in all_checks(res, ["x"]))
    assert res.inventory() == []


def test_five_simulators_no_crashes():
    res = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(1))
    assert set(res.outputs) == set(range(5))
    assert set(res.outputs.values()) <= set(INPUTS5)
    assert all(r.passed for r in all_checks(res, INPUTS5))


@given(st.integers(0, 10_000))
@settings(max_examples=40)
def test_three_crashes_still_progress(seed):
    hook = WindowCrasher(3, seed, prob=0.5, include="bg/")
    res = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(seed), crash_hook=hook)
    assert len(res.crashed) <= 3
    for r in all_checks(res, INPUTS5):
        assert r.passed, r.to_tsv()


def test_inventory_one_snapshot_crash():
    # ST_9 has no simulated snapshots, so simulate a 3-process 2-agreement
    found = False
    for seed in range(20):
        res = bg_run(EXAMPLE, 3, 5, INPUTS5, Schedule.seeded(seed), simulated=LAgreement(2),
                     crash_hook=BlockingCrasher([("bg/snapshot/", 1)]))
        assert len(res.crashed) == 1
        inv = res.inventory()
        assert inv in ([], [(1, 1)])
        found |= inv == [(1, 1)]
        assert res.simulated_decisions() and check_bg_consistency(res).passed
    assert found


def test_inventory_first_writer_crash():
    # the crashed writer is seen by everyone else, so its instance never decides
    found = False
    for seed in range(20):
        res = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(seed),
                     crash_hook=BlockingCrasher([("bg/input/", 1)]))
        inv = res.inventory()
        assert inv in ([], [(1, 1)])
        found |= inv == [(1, 1)]
    assert found


def test_inventory_blocked_sc_value():
    found = False
    for seed in range(20):
        res = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(seed),
                     crash_hook=BlockingCrasher([("bg/sc-value/", 2)]))
        inv = res.inventory()
        assert sum(s for _, s in inv) <= len(res.crashed)
        found |= inv == [(5, 2)]
        assert all(r.passed for r in all_checks(res, INPUTS5))
    assert found


def test_no_crashes_empty_inventory():
    res = bg_run(EXAMPLE, 9, 10, list(range(10)), Schedule.seeded(0))
    assert blocked_inventory(res.world, res.protocol) == []


def test_full_blocking_multiset_may_stop_progress():
    # two blocked (5,2) objects: f = 4 = AL_9 crashes, which the bound allows to stop everything
    hook = BlockingCrasher([("bg/sc-value/st9/g0/", 2), ("bg/sc-value/st9/g1/", 2)])
    res = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule("round-robin"), crash_hook=hook)
    r = check_bg_progress(EXAMPLE, 9, res)
    assert r.passed and r.stats["informational"] is True
    assert len(res.crashed) == al(EXAMPLE, 9)


def test_replay_is_deterministic():
    runs = [
        bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(7, crashes={1: 9, 3: 20}))
        for _ in range(2)
    ]
    assert runs[0].trace.to_tsv() == runs[1].trace.to_tsv()


def test_online_crashes_replay():
    live = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(3),
                  crash_hook=WindowCrasher(2, 3, prob=0.6, include="bg/"))
    again = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(3, crashes=live.world.crash_at))
    assert live.trace.to_tsv() == again.trace.to_tsv()


def test_simulating_adaptive():
    res = bg_run(EXAMPLE, 9, 4, [1, 2, 3, 4], Schedule.seeded(5), simulated=AdaptiveProtocol(EXAMPLE, 9))
    assert res.simulated_decisions()
    assert check_bg_consistency(res).passed


def test_merge_flags_divergence():
    proto = BGProtocol(EXAMPLE, LAgreement(1), 2, 2)
    a = (SimState(0, 1, 5), None)
    b = (SimState(0, 1, 6), None)
    proto.merge((a, b))
    assert proto.violations


def test_bad_arguments():
    with pytest.raises(ValueError):
        bg_run(EXAMPLE, 9, 0, [])
    with pytest.raises(ValueError):
        bg_run(EXAMPLE, 9, 2, [1])


@given(st.integers(0, 10_000))
@settings(max_examples=30)
def test_simulated_busy_waits_stay_consistent(seed):
    hook = WindowCrasher(2, seed, prob=0.4, include="bg/")
    res = bg_run(EXAMPLE, 4, 4, [1, 2, 3, 4], Schedule.seeded(seed), simulated=LAgreement(2), crash_hook=hook)
    assert check_bg_consistency(res).passed
    assert set(res.outputs.values()) <= {1, 2, 3, 4}


def test_witness_blockers():
    assert witness_blockers(EXAMPLE, 9, 4) == [("bg/sc-value/st9/g0/", 2), ("bg/sc-value/st9/g1/", 2)]
    assert witness_blockers(EXAMPLE, 9, 3) == [("bg/sc-value/st9/g0/", 2), ("bg/input/", 1)]
    ref = parse_collection("1:1,13:5,20:9")
    assert witness_blockers(ref, 16, 8) == [("bg/sc-value/st16/g0/", 5), ("bg/input/13/", 1),
                                            ("bg/input/14/", 1), ("bg/input/15/", 1)]


@given(st.integers(0, 10_000), st.integers(0, 3))
@settings(max_examples=25)
def test_blocking_below_bound_progresses(seed, f):
    res = bg_run(EXAMPLE, 9, 5, INPUTS5, Schedule.seeded(seed),
                 crash_hook=BlockingCrasher(witness_blockers(EXAMPLE, 9, f)))
    assert all(r.passed for r in all_checks(res, INPUTS5))
