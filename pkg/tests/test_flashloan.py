"""Flash-loan deals: repayment-gated commit, lender never loses."""

from __future__ import annotations

import pytest

from crossdeal.engine import EngineError
from crossdeal.scenarios import actor_keys, build_flashloan, explore, run_scenario

PROFITABLE = {
    "kind": "flashloan",
    "loan_chain": "coin-a",
    "action_chain": "coin-b",
    "principal": 100,
    "premium": 1,
    "maker_payment": 108,
    "borrower_take": 5,
    "lender_funds": 150,
    "settle_at": 10,
    "timeout": 300,
}


def test_profitable_loan_commits_and_pays_premium():
    result = run_scenario(PROFITABLE, seed=3)
    assert result.outcome == "committed"
    safety = result.report["lender_safety"]
    assert safety["ok"] and safety["final"] == safety["initial"] + 1


def test_borrower_collects_both_legs():
    sched, stack = build_flashloan(PROFITABLE, seed=3)
    sched.run()
    borrower = actor_keys("borrower").address
    # 108 maker payment - 101 repayment = 7 on the loan chain, 5 on the action chain.
    assert stack.ledgers["coin-a"].balance_or_zero(borrower) == 7
    assert stack.ledgers["coin-b"].balance_or_zero(borrower) == 5


def test_under_repayment_aborts_whole_deal():
    """Repaying 100 against principal 100 + premium 1 fails validation."""
    result = run_scenario(dict(PROFITABLE, maker_payment=100), seed=3,
                          keep_trace=True)
    assert result.outcome == "aborted"
    safety = result.report["lender_safety"]
    assert safety["ok"] and safety["final"] == safety["initial"]
    assert any(e["kind"] == "rejected_vote" for e in result.trace)


def test_borrower_crash_watchdog_refunds():
    spec = dict(PROFITABLE, faults={"crashes": [["borrower", 5, None]]})
    result = run_scenario(spec, seed=3)
    assert result.outcome == "aborted"
    assert result.report["lender_safety"]["ok"]
    assert result.report["all_terminal"]


def test_zero_premium_is_legal():
    result = run_scenario(dict(PROFITABLE, premium=0, maker_payment=100), seed=3)
    assert result.outcome == "committed"
    safety = result.report["lender_safety"]
    assert safety["final"] == safety["initial"]


def test_underfunded_lender_rejected():
    with pytest.raises(EngineError) as err:
        run_scenario(dict(PROFITABLE, lender_funds=99), seed=1)
    assert err.value.code == "InsufficientBalance"


def test_lender_safe_across_fault_sweep():
    spec = dict(PROFITABLE,
                faults={"delay": [1, 6], "dup_rate": 0.08, "drop_rate": 0.08},
                random_faults={"party_crash_rate": 0.3, "svc_crash_rate": 0.25,
                               "window": [3, 60]})
    report = explore(spec, range(60))
    assert report.ok
    assert not report.stuck_seeds
    assert set(report.outcomes) <= {"committed", "aborted"}
