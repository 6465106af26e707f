import pytest
from hypothesis import given, strategies as st

from setcon.calculus import parse_collection
from setcon.protocols import LAgreement, build_static
from setcon.runtime import Event, Schedule, Trace, new_world
from setcon.verify import (
    CheckReport,
    check_adaptive_optimality,
    check_k_set_consensus,
    check_l_agreement,
    stalled_mid_protocol,
)

EXAMPLE = parse_collection("1:1,2:1,5:2")


def decisions(*pairs):
    return Trace(Event(i, p, "decide", None, v) for i, (p, v) in enumerate(pairs))


def test_report_needs_witness_on_fail():
    with pytest.raises(ValueError):
        CheckReport("x", "fail")
    with pytest.raises(ValueError):
        CheckReport("x", "maybe")


def test_report_tsv():
    r = CheckReport("kset:2", "fail", ["p0 undecided"], {"k": 2, "ok": False})
    assert r.to_tsv() == "kset:2\tfail\tk=2\tok=false\twitnesses=p0 undecided"


def test_kset_validity_agreement_termination():
    inputs = [1, 2, 3]
    assert check_k_set_consensus(inputs, decisions((0, 1), (1, 2), (2, 2)), 2).passed
    assert not check_k_set_consensus(inputs, decisions((0, 1), (1, 2), (2, 3)), 2).passed
    assert not check_k_set_consensus(inputs, decisions((0, 9), (1, 1), (2, 1)), 2).passed
    r = check_k_set_consensus(inputs, decisions((0, 1), (1, 1)), 2)
    assert not r.passed and "correct p2 undecided" in r.witnesses


def test_crashed_processes_need_not_decide():
    t = Trace([Event(0, 2, "crash", None), Event(1, 0, "decide", None, 1)])
    assert check_k_set_consensus([1, None, 3], t, 1).passed


def test_all_equal_inputs_one_value():
    proto = build_static(EXAMPLE, 9)
    w = new_world(9, proto, [5] * 9, Schedule.seeded(3))
    w.run()
    assert check_k_set_consensus([5] * 9, w.trace, 1).passed


def test_static_tight_seed_fails_k3():
    proto = build_static(EXAMPLE, 9)
    inputs = list(range(1, 10))
    for seed in range(50):
        w = new_world(9, proto, inputs, Schedule.seeded(seed))
        w.run()
        if len(set(w.trace.decisions().values())) == 4:
            assert check_k_set_consensus(inputs, w.trace, 4).passed
            assert not check_k_set_consensus(inputs, w.trace, 3).passed
            return
    pytest.fail("no tight seed in 50")


@given(st.integers(0, 5000), st.integers(1, 9))
def test_kset_passes_for_larger_k(seed, k):
    proto = build_static(EXAMPLE, 9)
    inputs = list(range(1, 10))
    w = new_world(9, proto, inputs, Schedule.seeded(seed))
    w.run()
    if check_k_set_consensus(inputs, w.trace, k).passed:
        assert check_k_set_consensus(inputs, w.trace, k + 1).passed
    assert check_k_set_consensus(inputs, w.trace, k) == check_k_set_consensus(inputs, w.trace, k)


def test_stalled_mid_protocol():
    t = Trace([
        Event(0, 0, "update", "A", 1),
        Event(1, 1, "update", "A", 2),
        Event(2, 1, "update", "B", (1, 2)),
        Event(3, 0, "crash", None),
        Event(4, 1, "crash", None),
    ])
    assert stalled_mid_protocol(t) == {0}


def test_lagree_one_mid_crash_of_five():
    inputs = [1, 2, 3, 4, 5]
    w = new_world(5, LAgreement(2), inputs, Schedule.seeded(4, crashes={2: 1}))
    w.run()
    r = check_l_agreement(w.trace, 2, inputs)
    assert r.passed and r.stats["stalled"] == 1 and r.stats["termination_required"] is True


def test_lagree_two_straddling_crashes():
    inputs = [1, 2, 3, 4, 5]
    w = new_world(5, LAgreement(2), inputs, Schedule("scripted", script=(0, 1, 0, 1), crashes={0: 2, 1: 2}),
                  stall_steps=50)
    w.run(strict=False)
    r = check_l_agreement(w.trace, 2, inputs)
    assert r.passed and r.stats["termination_required"] is False
    assert r.stats["distinct"] <= 2


def test_lagree_without_inputs_reads_trace():
    w = new_world(3, LAgreement(1), [4, 5, 6], Schedule.seeded(1))
    w.run()
    assert check_l_agreement(w.trace, 1).passed


def test_adaptive_bounds():
    ref = parse_collection("1:1,13:5,20:9")
    assert check_adaptive_optimality(EXAMPLE, decisions((0, "a"), (1, "a")), [0, 1]).stats["bound"] == 1
    assert not check_adaptive_optimality(EXAMPLE, decisions((0, "a"), (1, "b")), [0, 1]).passed
    r = check_adaptive_optimality(ref, decisions(*[(p, p % 6) for p in range(14)]), range(14))
    assert r.passed and r.stats["bound"] == 6
    assert check_adaptive_optimality(ref, decisions((3, 7)), [3], [None, None, None, 7]).passed
