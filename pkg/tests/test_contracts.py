"""Escrow phase machines: deposits, plans, attested conclusions, refunds."""

from __future__ import annotations

import pytest

from crossdeal.chain import Ledger, call_payload, deploy_payload, sign_tx
from crossdeal.deal import (
    AbortRequest,
    CommitVote,
    abort_conclusion_payload,
    commit_conclusion_payload,
    transfer_digest,
    vote_message,
)
from crossdeal.eventlog import EventLog, RecordKind, append_signature
from crossdeal.keys import KeyPair

DEAL = "d1" * 32


def _submit(ledger, keypair, payload):
    tx = sign_tx(keypair, ledger.chain_id, ledger.next_nonce(keypair.address), payload)
    return ledger.submit(tx)


class Fixture:
    """One ticket chain + one coin chain with deployed escrows for DEAL."""

    def __init__(self, roster):
        self.auctioneer = roster["auctioneer"]
        self.bidder1 = roster["bidder-1"]
        self.bidder2 = roster["bidder-2"]
        self.svc = roster["service"]
        self.log_op = roster["log-op"]
        self.log = EventLog(self.log_op)
        self.parties = [self.auctioneer, self.bidder1, self.bidder2]
        self.ticket = Ledger(
            "ticket-chain",
            accounts={self.svc.address: 0},
            nfts={"ticket-1": self.auctioneer.address},
        )
        self.coin = Ledger(
            "coin-a",
            accounts={
                self.bidder1.address: 1000,
                self.bidder2.address: 1000,
                self.svc.address: 0,
            },
        )
        init_common = {
            "deal_id": DEAL,
            "party_keys": [p.public_hex for p in self.parties],
            "log_keys": [self.log_op.public_hex],
            "service_key": self.svc.public_hex,
            "specifier_account": self.auctioneer.address,
        }
        r = _submit(self.ticket, self.svc,
                    deploy_payload("TicketEscrow", {**init_common, "ticket": "ticket-1"}))
        self.ticket_addr = r.result["address"]
        r = _submit(self.coin, self.svc, deploy_payload("CoinEscrow", init_common))
        self.coin_addr = r.result["address"]

    # -- protocol steps ----------------------------------------------------

    def deposit_ticket(self):
        return _submit(self.ticket, self.auctioneer,
                       call_payload(self.ticket_addr, "deposit", {}))

    def deposit_coin(self, bidder, amount):
        return _submit(self.coin, bidder,
                       call_payload(self.coin_addr, "deposit", {"amount": amount}))

    def specify(self, recipient, transfers):
        digest = self.plan_digest(recipient, transfers)
        r1 = _submit(self.ticket, self.auctioneer,
                     call_payload(self.ticket_addr, "specify_transfer",
                                  {"plan": {"recipient": recipient}, "deal_digest": digest}))
        r2 = _submit(self.coin, self.auctioneer,
                     call_payload(self.coin_addr, "specify_transfer",
                                  {"plan": {"transfers": transfers}, "deal_digest": digest}))
        return r1, r2, digest

    def plan_digest(self, recipient, transfers):
        return transfer_digest([
            ("ticket-chain", {"recipient": recipient}),
            ("coin-a", {"transfers": transfers}),
        ])

    def full_vote(self, digest):
        vote = CommitVote(DEAL, digest)
        for p in self.parties:
            vote.add_signature(p.public_hex, p.sign(vote_message(DEAL, digest)))
        return vote

    def logged_commit(self, vote):
        payload = commit_conclusion_payload(vote)
        sig = append_signature(self.svc, DEAL, RecordKind.CONCLUSION, payload)
        offset = self.log.append(DEAL, RecordKind.CONCLUSION, payload,
                                 self.svc.public_hex, sig)
        return self.log.attest(DEAL, offset)

    def logged_abort(self, request):
        payload = abort_conclusion_payload(request)
        sig = append_signature(self.svc, DEAL, RecordKind.CONCLUSION, payload)
        offset = self.log.append(DEAL, RecordKind.CONCLUSION, payload,
                                 self.svc.public_hex, sig)
        return self.log.attest(DEAL, offset)

    def commit_call(self, ledger, addr, vote, attestation):
        return _submit(ledger, self.svc,
                       call_payload(addr, "commit",
                                    {"vote": vote.to_json(),
                                     "attestation": attestation.to_json()}))

    def abort_call(self, ledger, addr, request, attestation):
        return _submit(ledger, self.svc,
                       call_payload(addr, "abort",
                                    {"request": request.to_json(),
                                     "attestation": attestation.to_json()}))


@pytest.fixture()
def fx(roster):
    return Fixture(roster)


def test_ticket_deposit_escrows_nft(fx):
    receipt = fx.deposit_ticket()
    assert receipt.ok
    assert fx.ticket.nft_owner("ticket-1") == fx.ticket_addr
    assert fx.ticket.contract_state(fx.ticket_addr)["phase"] == "Escrowed"
    assert receipt.events[0].kind == "Escrowed"


def test_coin_deposits_are_additive(fx):
    assert fx.deposit_coin(fx.bidder1, 50).ok
    assert fx.deposit_coin(fx.bidder1, 20).ok
    state = fx.coin.contract_state(fx.coin_addr)
    assert state["deposits"][fx.bidder1.address] == 70
    assert fx.coin.balance(fx.bidder1.address) == 930


def test_deposit_after_specify_wrong_phase(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    fx.specify(fx.bidder1.address, [])
    receipt = fx.deposit_coin(fx.bidder2, 10)
    assert not receipt.ok and receipt.error_code == "WrongPhase"


def test_withdraw_restores_balance_exactly(fx):
    fx.deposit_coin(fx.bidder1, 120)
    receipt = _submit(fx.coin, fx.bidder1,
                      call_payload(fx.coin_addr, "withdraw_bid", {}))
    assert receipt.ok and receipt.result["refunded"] == 120
    assert fx.coin.balance(fx.bidder1.address) == 1000


def test_withdraw_after_specify_forbidden(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    fx.specify(fx.bidder1.address, [])
    receipt = _submit(fx.coin, fx.bidder1,
                      call_payload(fx.coin_addr, "withdraw_bid", {}))
    assert not receipt.ok and receipt.error_code == "WrongPhase"


def test_withdraw_without_deposit(fx):
    fx.deposit_coin(fx.bidder1, 50)
    receipt = _submit(fx.coin, fx.bidder2,
                      call_payload(fx.coin_addr, "withdraw_bid", {}))
    assert not receipt.ok and receipt.error_code == "NoDeposit"


def test_specify_is_tentative(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 100)
    r1, r2, _ = fx.specify(fx.bidder1.address,
                           [{"from": fx.bidder1.address,
                             "to": fx.auctioneer.address, "amount": 100}])
    assert r1.ok and r2.ok
    # Nothing moves until commit.
    assert fx.ticket.nft_owner("ticket-1") == fx.ticket_addr
    assert fx.coin.balance_or_zero(fx.auctioneer.address) == 0
    state = fx.ticket.contract_state(fx.ticket_addr)
    assert state["specified_recipient"] == fx.bidder1.address


def test_specify_plan_exceeding_deposits(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 70)
    digest = fx.plan_digest(fx.bidder1.address, [])
    receipt = _submit(fx.coin, fx.auctioneer,
                      call_payload(fx.coin_addr, "specify_transfer",
                                   {"plan": {"transfers": [
                                       {"from": fx.bidder1.address,
                                        "to": fx.auctioneer.address, "amount": 80}]},
                                    "deal_digest": digest}))
    assert not receipt.ok and receipt.error_code == "PlanExceedsDeposits"


def test_specify_requires_specifier(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    digest = fx.plan_digest(fx.bidder1.address, [])
    receipt = _submit(fx.coin, fx.bidder2,
                      call_payload(fx.coin_addr, "specify_transfer",
                                   {"plan": {"transfers": []}, "deal_digest": digest}))
    assert not receipt.ok and receipt.error_code == "BadSignature"


def test_refund_plan_stored_verbatim(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 60)
    fx.deposit_coin(fx.bidder2, 40)
    refunds = [
        {"from": fx.bidder1.address, "to": fx.bidder1.address, "amount": 60},
        {"from": fx.bidder2.address, "to": fx.bidder2.address, "amount": 40},
    ]
    _, r2, _ = fx.specify(fx.auctioneer.address, refunds)
    assert r2.ok
    assert fx.coin.contract_state(fx.coin_addr)["transfers"] == refunds


def test_commit_moves_assets_per_plan(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 120)
    fx.deposit_coin(fx.bidder2, 80)
    transfers = [{"from": fx.bidder1.address, "to": fx.auctioneer.address, "amount": 100}]
    _, _, digest = fx.specify(fx.bidder1.address, transfers)
    vote = fx.full_vote(digest)
    attestation = fx.logged_commit(vote)
    assert fx.commit_call(fx.ticket, fx.ticket_addr, vote, attestation).ok
    assert fx.commit_call(fx.coin, fx.coin_addr, vote, attestation).ok
    # Winner takes the ticket; auctioneer the winning bid; remainders refunded.
    assert fx.ticket.nft_owner("ticket-1") == fx.bidder1.address
    assert fx.coin.balance(fx.auctioneer.address) == 100
    assert fx.coin.balance(fx.bidder1.address) == 900  # 1000 - 120 + 20 back
    assert fx.coin.balance(fx.bidder2.address) == 1000  # unreferenced deposit refunded
    assert fx.coin.contract_state(fx.coin_addr)["phase"] == "Committed"


def test_commit_exactness_against_recompute(fx):
    """Brute-force recompute of post-commit holdings from (deposits, plan)."""
    fx.deposit_ticket()
    deposits = {fx.bidder1: 130, fx.bidder2: 70}
    for bidder, amount in deposits.items():
        fx.deposit_coin(bidder, amount)
    transfers = [
        {"from": fx.bidder1.address, "to": fx.auctioneer.address, "amount": 90},
        {"from": fx.bidder2.address, "to": fx.auctioneer.address, "amount": 10},
    ]
    _, _, digest = fx.specify(fx.bidder1.address, transfers)
    vote = fx.full_vote(digest)
    attestation = fx.logged_commit(vote)
    fx.commit_call(fx.coin, fx.coin_addr, vote, attestation)

    expected = {fx.bidder1.address: 1000 - 130, fx.bidder2.address: 1000 - 70,
                fx.auctioneer.address: 0}
    held = {fx.bidder1.address: 130, fx.bidder2.address: 70}
    for t in transfers:
        expected[t["to"]] = expected.get(t["to"], 0) + t["amount"]
        held[t["from"]] -= t["amount"]
    for bidder, left in held.items():
        expected[bidder] += left
    for account, balance in expected.items():
        assert fx.coin.balance(account) == balance


def test_commit_missing_signature_incomplete(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    _, _, digest = fx.specify(fx.bidder1.address, [])
    vote = CommitVote(DEAL, digest)
    for p in [fx.auctioneer, fx.bidder1]:  # bidder-2 missing
        vote.add_signature(p.public_hex, p.sign(vote_message(DEAL, digest)))
    attestation = fx.logged_commit(vote)
    before = fx.ticket.state_digest()
    receipt = fx.commit_call(fx.ticket, fx.ticket_addr, vote, attestation)
    assert not receipt.ok and receipt.error_code == "IncompleteVote"
    assert fx.ticket.state_digest() == before


def test_commit_attestation_over_wrong_record(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    _, _, digest = fx.specify(fx.bidder1.address, [])
    vote = fx.full_vote(digest)
    # Attest an unrelated info record instead of the conclusion.
    sig = append_signature(fx.svc, DEAL, RecordKind.INFO, {"note": "x"})
    offset = fx.log.append(DEAL, RecordKind.INFO, {"note": "x"}, fx.svc.public_hex, sig)
    wrong = fx.log.attest(DEAL, offset)
    receipt = fx.commit_call(fx.ticket, fx.ticket_addr, vote, wrong)
    assert not receipt.ok and receipt.error_code == "BadAttestation"


def test_commit_digest_mismatch(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    fx.specify(fx.bidder1.address, [])
    other_digest = fx.plan_digest(fx.bidder2.address, [])
    vote = fx.full_vote(other_digest)
    attestation = fx.logged_commit(vote)
    receipt = fx.commit_call(fx.ticket, fx.ticket_addr, vote, attestation)
    assert not receipt.ok and receipt.error_code == "DigestMismatch"


def test_abort_restores_pre_escrow_holdings(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 300)
    fx.deposit_coin(fx.bidder2, 500)
    request = AbortRequest.signed(fx.bidder2, DEAL, "changed my mind")
    attestation = fx.logged_abort(request)
    assert fx.abort_call(fx.ticket, fx.ticket_addr, request, attestation).ok
    assert fx.abort_call(fx.coin, fx.coin_addr, request, attestation).ok
    assert fx.ticket.nft_owner("ticket-1") == fx.auctioneer.address
    assert fx.coin.balance(fx.bidder1.address) == 1000
    assert fx.coin.balance(fx.bidder2.address) == 1000


def test_abort_after_commit_is_terminal(fx):
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    _, _, digest = fx.specify(fx.bidder1.address, [])
    vote = fx.full_vote(digest)
    fx.commit_call(fx.ticket, fx.ticket_addr, vote, fx.logged_commit(vote))
    # The arbitrating log refuses a second conclusion, so fabricate the abort
    # attestation on a mutated log: the contract must still refuse it.
    request = AbortRequest.signed(fx.bidder1, DEAL, "too late")
    rogue_log = EventLog(fx.log_op, arbitrate_conclusions=False)
    payload = abort_conclusion_payload(request)
    sig = append_signature(fx.svc, DEAL, RecordKind.CONCLUSION, payload)
    offset = rogue_log.append(DEAL, RecordKind.CONCLUSION, payload, fx.svc.public_hex, sig)
    attestation = rogue_log.attest(DEAL, offset)
    receipt = fx.abort_call(fx.ticket, fx.ticket_addr, request, attestation)
    assert not receipt.ok and receipt.error_code == "WrongPhase"


def test_abort_wrong_deal_rejected(fx):
    fx.deposit_coin(fx.bidder1, 50)
    other_deal = "e2" * 32
    request = AbortRequest.signed(fx.bidder1, other_deal, "wrong deal")
    payload = abort_conclusion_payload(request)
    sig = append_signature(fx.svc, other_deal, RecordKind.CONCLUSION, payload)
    offset = fx.log.append(other_deal, RecordKind.CONCLUSION, payload,
                           fx.svc.public_hex, sig)
    attestation = fx.log.attest(other_deal, offset)
    receipt = fx.abort_call(fx.coin, fx.coin_addr, request, attestation)
    assert not receipt.ok and receipt.error_code == "BadAttestation"


def test_abort_by_outsider_rejected(fx, roster):
    fx.deposit_coin(fx.bidder1, 50)
    outsider = roster["outsider"]
    request = AbortRequest.signed(outsider, DEAL, "griefing")
    attestation = fx.logged_abort(request)
    receipt = fx.abort_call(fx.coin, fx.coin_addr, request, attestation)
    assert not receipt.ok and receipt.error_code == "BadAttestation"


def test_relay_bid_dedup(fx):
    fx.deposit_ticket()
    args = {"origin_chain": "coin-a", "bidder": fx.bidder1.address,
            "amount": 50, "origin_seq": 0, "log_seq": 3}
    r1 = _submit(fx.ticket, fx.svc, call_payload(fx.ticket_addr, "relay_bid", args))
    r2 = _submit(fx.ticket, fx.svc, call_payload(fx.ticket_addr, "relay_bid", args))
    assert r1.ok and r2.ok and r2.result.get("duplicate")
    assert len(fx.ticket.contract_state(fx.ticket_addr)["relayed_bids"]) == 1


def test_conclusions_are_exclusive_per_contract(fx):
    """A contract accepts commit xor abort, never both."""
    fx.deposit_ticket()
    fx.deposit_coin(fx.bidder1, 50)
    _, _, digest = fx.specify(fx.bidder1.address, [])
    vote = fx.full_vote(digest)
    attestation = fx.logged_commit(vote)
    assert fx.commit_call(fx.coin, fx.coin_addr, vote, attestation).ok
    replay = fx.commit_call(fx.coin, fx.coin_addr, vote, attestation)
    assert not replay.ok and replay.error_code == "WrongPhase"


def test_abort_identity_over_random_reachable_states(roster):
    """Any deposit/withdraw history followed by abort nets out to zero."""
    import random

    rng = random.Random(71)
    for case in range(30):
        fx = Fixture(roster)
        fx.deposit_ticket()
        bidders = [fx.bidder1, fx.bidder2]
        for _ in range(rng.randint(1, 8)):
            bidder = rng.choice(bidders)
            if rng.random() < 0.3:
                _submit(fx.coin, bidder, call_payload(fx.coin_addr, "withdraw_bid", {}))
            else:
                fx.deposit_coin(bidder, rng.randint(1, 120))
        if rng.random() < 0.5:
            deposits = fx.coin.contract_state(fx.coin_addr)["deposits"]
            plan = [{"from": b, "to": fx.auctioneer.address,
                     "amount": rng.randint(1, amount)}
                    for b, amount in deposits.items() if rng.random() < 0.7]
            fx.specify(fx.bidder1.address, plan)
        request = AbortRequest.signed(fx.bidder1, DEAL, f"case {case}")
        attestation = fx.logged_abort(request)
        assert fx.abort_call(fx.ticket, fx.ticket_addr, request, attestation).ok
        assert fx.abort_call(fx.coin, fx.coin_addr, request, attestation).ok
        assert fx.ticket.nft_owner("ticket-1") == fx.auctioneer.address
        assert fx.coin.balance(fx.bidder1.address) == 1000, f"case {case}"
        assert fx.coin.balance(fx.bidder2.address) == 1000, f"case {case}"
        assert fx.coin.total_supply() == fx.coin.genesis_supply


def test_commit_exactness_over_random_plans(roster):
    """Post-commit holdings always equal the plan applied to the deposits."""
    import random

    rng = random.Random(37)
    for case in range(30):
        fx = Fixture(roster)
        fx.deposit_ticket()
        deposits = {}
        for bidder in (fx.bidder1, fx.bidder2):
            amount = rng.randint(1, 300)
            fx.deposit_coin(bidder, amount)
            deposits[bidder.address] = amount
        plan = []
        remaining = dict(deposits)
        for bidder_addr, deposited in deposits.items():
            for _ in range(rng.randint(0, 2)):
                if remaining[bidder_addr] <= 0:
                    break
                amount = rng.randint(1, remaining[bidder_addr])
                remaining[bidder_addr] -= amount
                target = rng.choice([fx.auctioneer.address, fx.bidder1.address])
                plan.append({"from": bidder_addr, "to": target, "amount": amount})
        _, _, digest = fx.specify(fx.bidder1.address, plan)
        vote = fx.full_vote(digest)
        attestation = fx.logged_commit(vote)
        assert fx.commit_call(fx.coin, fx.coin_addr, vote, attestation).ok

        expected = {fx.bidder1.address: 1000 - deposits[fx.bidder1.address],
                    fx.bidder2.address: 1000 - deposits[fx.bidder2.address],
                    fx.auctioneer.address: 0}
        for t in plan:
            expected[t["to"]] = expected.get(t["to"], 0) + t["amount"]
        for bidder_addr, left in remaining.items():
            expected[bidder_addr] += left
        for account, balance in expected.items():
            assert fx.coin.balance_or_zero(account) == balance, f"case {case}"
        assert fx.coin.total_supply() == fx.coin.genesis_supply
