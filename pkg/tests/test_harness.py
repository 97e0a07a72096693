"""Scheduler determinism, fault injection, step bounds, and detectors."""

from __future__ import annotations

from crossdeal.harness import FaultPlan, Message, Scheduler
from crossdeal.scenarios import explore, run_scenario

SPEC = {
    "kind": "auction",
    "coin_chains": ["coin-a", "coin-b"],
    "rates": {"coin-a": [1, 1], "coin-b": [2, 1]},
    "bidders": [
        {"name": "bidder-1", "chain": "coin-a", "funds": 1000,
         "bids": [{"at": 10, "amount": 100}]},
        {"name": "bidder-2", "chain": "coin-b", "funds": 1000,
         "bids": [{"at": 14, "amount": 45}]},
    ],
    "end_at": 60,
    "timeout": 500,
    "faults": {"delay": [1, 6], "dup_rate": 0.1, "drop_rate": 0.1,
               "equivocator": "bidder-2"},
    "random_faults": {"party_crash_rate": 0.25, "svc_crash_rate": 0.3,
                      "window": [5, 160]},
}


class Echo:
    def __init__(self):
        self.seen = []

    def handle(self, msg: Message, ctx: Scheduler) -> None:
        self.seen.append((ctx.now, msg.kind, msg.payload.get("i")))


def test_messages_eventually_delivered_despite_drops():
    sched = Scheduler(seed=5, faults=FaultPlan(drop_rate=0.9, delay_range=(1, 3)))
    echo = Echo()
    sched.register("echo", echo)
    for i in range(50):
        sched.send("echo", "ping", {"i": i})
    assert sched.run()
    assert sorted(x[2] for x in echo.seen) == list(range(50))


def test_duplicates_deliver_at_least_twice():
    sched = Scheduler(seed=5, faults=FaultPlan(dup_rate=1.0))
    echo = Echo()
    sched.register("echo", echo)
    sched.send("echo", "ping", {"i": 1})
    sched.run()
    assert len(echo.seen) == 2


def test_crashed_actor_drops_messages_until_restart():
    sched = Scheduler(seed=5, faults=FaultPlan(crashes=[("echo", 5, 20)],
                                               delay_range=(0, 0)))
    echo = Echo()
    sched.register("echo", echo)
    sched.send("echo", "ping", {"i": 1}, delay=10, reliable=True)   # while down
    sched.send("echo", "ping", {"i": 2}, delay=30, reliable=True)   # after restart
    sched.run()
    assert [x[2] for x in echo.seen] == [2]


def test_reliable_messages_bypass_faults():
    sched = Scheduler(seed=5, faults=FaultPlan(drop_rate=1.0, dup_rate=1.0,
                                               delay_range=(50, 90)))
    echo = Echo()
    sched.register("echo", echo)
    sched.send("echo", "tick", {"i": 1}, delay=7, reliable=True)
    sched.run()
    assert echo.seen == [(7, "tick", 1)]


def test_same_seed_same_trace_and_digests():
    a = run_scenario(SPEC, seed=42)
    b = run_scenario(SPEC, seed=42)
    assert a.trace_hash == b.trace_hash
    assert a.digests == b.digests
    assert a.outcome == b.outcome


def test_different_seeds_vary_schedules():
    hashes = {run_scenario(SPEC, seed=s).trace_hash for s in range(6)}
    assert len(hashes) == 6


def test_step_bound_returns_partial_result():
    result = run_scenario(SPEC, seed=1, step_bound=10)
    assert not result.quiesced
    assert result.steps == 10


def test_single_seed_explore_equals_run():
    single = run_scenario(SPEC, seed=9)
    report = explore(SPEC, [9])
    assert report.runs == 1
    assert report.outcomes == {single.outcome: 1}
    assert report.ok == single.report["ok"]


def test_negative_control_detects_broken_arbitration():
    """With first-wins disabled, mixed outcomes must show up and be flagged."""
    report = explore(SPEC, range(60), mutations={"log_arbitration": False},
                     stop_on_violation=True)
    assert not report.ok
    assert report.violations


def test_malformed_scripts_rejected():
    import pytest

    from crossdeal.scenarios import ScriptError

    with pytest.raises(ScriptError):
        run_scenario({"kind": "nonsense"}, seed=1)
    with pytest.raises(ScriptError):
        run_scenario({"kind": "auction", "bidders": []}, seed=1)


def test_fault_plan_from_json_roundtrip():
    plan = FaultPlan.from_json({
        "delay": [2, 9], "dup_rate": 0.5, "drop_rate": 0.25,
        "crashes": [["svc", 10, 50], ["bidder-1", 30]],
        "equivocator": "bidder-2",
    })
    assert plan.delay_range == (2, 9)
    assert plan.crashes == [("svc", 10, 50), ("bidder-1", 30, None)]
    assert plan.equivocator == "bidder-2"
