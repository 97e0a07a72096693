"""Acceptance suite: the release gate, one verdict line per criterion.

Run with plain `pytest` (lines are printed unbuffered so they appear even
under capture) or `pytest tests/test_acceptance.py -s` to watch live.
"""

from __future__ import annotations

import json
import random
import socket
import subprocess
import sys
import time
from fractions import Fraction

import pytest

from crossdeal.auction import Bid, determine_winner
from crossdeal.eventlog import ConclusionExists, EventLog, RecordKind, append_signature
from crossdeal.keys import KeyPair
from crossdeal.scenarios import actor_keys, build_auction, explore, run_scenario

ADVERSARIAL_AUCTION = {
    "kind": "auction",
    "ticket_chain": "ticket-chain",
    "asset": "ticket-1",
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
    "faults": {"delay": [1, 6], "dup_rate": 0.08, "drop_rate": 0.08,
               "equivocator": "bidder-2"},
    "random_faults": {"party_crash_rate": 0.25, "svc_crash_rate": 0.3,
                      "window": [5, 160]},
}

PROFITABLE_LOAN = {
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
    "faults": {"delay": [1, 5], "dup_rate": 0.05, "drop_rate": 0.05},
}


def verdict(name: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE | {name:<28} | {'PASS' if ok else 'FAIL'} | {detail}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def adversarial_sweep():
    t0 = time.time()
    report = explore(ADVERSARIAL_AUCTION, range(1000))
    return report, time.time() - t0


def test_atomicity_1000_adversarial_seeds(adversarial_sweep):
    report, elapsed = adversarial_sweep
    mixed = report.outcomes.get("mixed", 0)
    atomicity_failures = [v for v in report.violations if "atomicity" in v["failed"]]
    ok = mixed == 0 and not atomicity_failures and elapsed < 60
    verdict("atomicity (1000 seeds)", ok,
            f"mixed={mixed}, violations={len(atomicity_failures)}, "
            f"outcomes={report.outcomes}, {elapsed:.1f}s (< 60s)")


def test_negative_control_finds_violation():
    report = explore(ADVERSARIAL_AUCTION, range(1000),
                     mutations={"log_arbitration": False}, stop_on_violation=True)
    verdict("negative control", bool(report.violations),
            f"first violation at seed "
            f"{report.violations[0]['seed'] if report.violations else '-'} "
            f"within {report.runs} runs of the 1000-seed budget")


def test_mutual_exclusion_10000_interleavings():
    operator = KeyPair.dev("log-operator")
    producer = KeyPair.dev("svc")
    payloads = {
        kind: {"deal_id": "deal-x", "conclusion": kind, "body": {}}
        for kind in ("commit", "abort")
    }
    sigs = {kind: append_signature(producer, "deal-x", RecordKind.CONCLUSION, payload)
            for kind, payload in payloads.items()}
    rng = random.Random(1234)
    cases = 10_000
    failures = 0
    for _ in range(cases):
        attempts = [rng.choice(("commit", "abort"))
                    for _ in range(rng.randint(1, 6))]
        log = EventLog(operator)
        accepted: list[str] = []
        for kind in attempts:
            try:
                log.append("deal-x", RecordKind.CONCLUSION, payloads[kind],
                           producer.public_hex, sigs[kind])
                accepted.append(kind)
            except ConclusionExists as err:
                if err.existing_kind != accepted[0]:
                    failures += 1
        conclusion = log.conclusion_for("deal-x")
        if len(accepted) != 1 or conclusion is None or conclusion[0] != attempts[0]:
            failures += 1
    verdict("mutual exclusion (10k)", failures == 0,
            f"{cases} randomized interleavings, {failures} first-wins failures")


def test_conservation_across_suite(adversarial_sweep):
    report, _ = adversarial_sweep
    broken = [v for v in report.violations
              if "conservation" in v["failed"] or "nft_unique" in v["failed"]]
    verdict("conservation + nft unique", not broken,
            f"checked after every scenario in the 1000-seed suite, "
            f"{len(broken)} violations (zero tolerance)")


def winner_oracle(bids):
    if not bids:
        return None
    return max(bids, key=lambda b: (b.normalized, -b.log_seq))


def test_auction_oracle_equivalence_1000():
    rng = random.Random(20_260_808)
    mismatches = 0
    ties_injected = 0
    for _ in range(1000):
        n_chains = rng.randint(1, 3)
        rates = {f"c{i}": Fraction(rng.randint(1, 12), rng.randint(1, 12))
                 for i in range(n_chains)}
        n_bidders = rng.randint(0, 5)
        seqs = rng.sample(range(200), n_bidders)
        target = rng.randint(1, 80)
        bids = []
        for i, seq in enumerate(seqs):
            chain = f"c{rng.randrange(n_chains)}"
            if rng.random() < 0.5:
                scaled = Fraction(target) / rates[chain]
                if scaled.denominator == 1 and scaled >= 1:
                    amount = int(scaled)
                    ties_injected += 1
                else:
                    amount = rng.randint(1, 400)
            else:
                amount = rng.randint(1, 400)
            bids.append(Bid(f"p{i}", chain, amount,
                            Fraction(amount) * rates[chain], seq))
        if determine_winner(bids) != winner_oracle(bids):
            mismatches += 1
    verdict("auction oracle (1000)", mismatches == 0,
            f"1000 random auctions, {ties_injected} tie injections, "
            f"{mismatches} oracle mismatches")


def test_liveness_200_seeds_crashed_bidder():
    stuck = 0
    unre_funded = 0
    for seed in range(200):
        crash_at = 5 + (seed * 7919) % 96  # deterministic spread over [5, 100]
        spec = {**ADVERSARIAL_AUCTION,
                "faults": {"delay": [1, 6], "dup_rate": 0.05, "drop_rate": 0.05,
                           "crashes": [["bidder-2", crash_at, None]]},
                "random_faults": None}
        spec.pop("random_faults")
        sched, stack = build_auction(spec, seed)
        quiesced = sched.run()
        deal = stack.descriptor
        phases = {c: stack.ledgers[c].contract_state(deal.contracts[c])["phase"]
                  for c in deal.chains}
        terminal = set(phases.values()) <= {"Committed", "Aborted"}
        if not (terminal and quiesced):
            stuck += 1
            continue
        if set(phases.values()) == {"Aborted"}:
            # Escrowed funds fully restored, ticket back with the auctioneer.
            for chain_id, ledger in stack.ledgers.items():
                for account, balance in stack.initial_balances[chain_id].items():
                    if ledger.balance_or_zero(account) != balance:
                        unre_funded += 1
            if stack.ledgers["ticket-chain"].nft_owner("ticket-1") != \
                    actor_keys("auctioneer").address:
                unre_funded += 1
    verdict("liveness (200 seeds)", stuck == 0 and unre_funded == 0,
            f"crashed bidder each run; non-terminal={stuck}, "
            f"refund mismatches={unre_funded}")


def test_flashloan_safety_200_runs():
    bad = 0
    outcomes = {"committed": 0, "aborted": 0}
    for seed in range(200):
        variant = seed % 3
        if variant == 0:
            spec = dict(PROFITABLE_LOAN)
        elif variant == 1:
            spec = dict(PROFITABLE_LOAN, maker_payment=100)  # under-repays
        else:
            crash_at = 3 + (seed * 31) % 40
            spec = dict(PROFITABLE_LOAN,
                        faults={"delay": [1, 5],
                                "crashes": [["borrower", crash_at, None]]})
        result = run_scenario(spec, seed)
        safety = result.report["lender_safety"]
        outcomes[result.outcome] = outcomes.get(result.outcome, 0) + 1
        if not safety["ok"] or not result.report["all_terminal"]:
            bad += 1
        if result.outcome == "committed" and \
                safety["final"] != safety["initial"] + spec["premium"]:
            bad += 1
    verdict("flash-loan safety (200)", bad == 0,
            f"profitable/unprofitable/crash variants, outcomes={outcomes}, "
            f"{bad} lender-safety failures")


def test_determinism_same_seed_same_everything():
    checked = 0
    for spec in (ADVERSARIAL_AUCTION, PROFITABLE_LOAN):
        for seed in (1, 17, 400):
            a = run_scenario(spec, seed)
            b = run_scenario(spec, seed)
            assert a.trace_hash == b.trace_hash
            assert a.digests == b.digests
            checked += 1
    verdict("determinism", True,
            f"{checked} scenario/seed pairs re-run with identical trace hashes "
            f"and state digests")


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _cli(*args: str, timeout: float = 90.0) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "crossdeal.cli", *args],
                          capture_output=True, text=True, timeout=timeout)


def test_end_to_end_demo_replay_via_cli():
    """Real-time stack, driven and inspected purely through the CLI."""
    port = _free_port()
    url = f"http://127.0.0.1:{port}"
    server = subprocess.Popen(
        [sys.executable, "-m", "crossdeal.cli", "demo-up", "--port", str(port)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    try:
        import httpx

        for _ in range(100):
            try:
                if httpx.get(f"{url}/health", timeout=1).status_code == 200:
                    break
            except Exception:
                time.sleep(0.2)
        else:
            raise AssertionError("gateway did not come up")

        demo = _cli("demo-auction", "--url", url, "--duration", "3",
                    "--bid1", "100", "--bid2", "45")
        assert demo.returncode == 0, demo.stdout + demo.stderr
        assert "demo complete" in demo.stdout

        owner = _cli("inspect-chain", "ticket-chain", "--url", url,
                     "--nft", "ticket-1")
        owner_json = json.loads(owner.stdout)
        winner = KeyPair.dev("bidder-1").address
        paid = _cli("inspect-chain", "coin-a", "--url", url,
                    "--account", "auctioneer")
        paid_json = json.loads(paid.stdout)

        auction_line = [line for line in demo.stdout.splitlines()
                        if "auction id" in line][0]
        deal_id = auction_line.split(":", 1)[1].strip()
        log_dump = _cli("inspect-log", deal_id, "--url", url)
        kinds = [json.loads(line)["kind"] for line in
                 log_dump.stdout.strip().splitlines()]

        ok = (owner_json["owner"] == winner and paid_json["balance"] == 100
              and "conclusion" in kinds and "end_auction" in kinds)
        verdict("end-to-end demo via CLI", ok,
                f"ticket owner=winner({owner_json['owner'][:8]}…), "
                f"auctioneer paid {paid_json['balance']} on coin-a, "
                f"log kinds={sorted(set(kinds))}")
    finally:
        server.terminate()
        server.wait(timeout=10)
