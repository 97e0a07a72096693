"""Deal descriptors, commit votes, abort requests, transfer digests."""

from __future__ import annotations

import pytest

from crossdeal.deal import (
    AbortRequest,
    CommitVote,
    DealDescriptor,
    Party,
    transfer_digest,
    vote_message,
)
from crossdeal.keys import KeyPair

A = KeyPair.dev("a")
B = KeyPair.dev("b")
PARTIES = [Party("auctioneer", "a", A.address, A.public_hex),
           Party("bidder", "b", B.address, B.public_hex)]


def test_deal_id_is_hash_of_descriptor_body():
    d1 = DealDescriptor.create(PARTIES, 0, ["t", "c"], 100)
    d2 = DealDescriptor.create(PARTIES, 0, ["t", "c"], 100)
    d3 = DealDescriptor.create(PARTIES, 0, ["t", "c"], 101)
    assert d1.deal_id == d2.deal_id
    assert d1.deal_id != d3.deal_id
    assert len(d1.deal_id) == 64


def test_descriptor_validation():
    with pytest.raises(ValueError):
        DealDescriptor.create([], 0, ["t"], 10)
    with pytest.raises(ValueError):
        DealDescriptor.create(PARTIES, 5, ["t"], 10)


def test_descriptor_roundtrip():
    descriptor = DealDescriptor.create(PARTIES, 1, ["t", "c"], 100)
    descriptor.contracts["t"] = "deadbeef"
    restored = DealDescriptor.from_json(descriptor.to_json())
    assert restored.deal_id == descriptor.deal_id
    assert restored.specifier_party.name == "b"
    assert restored.contracts == {"t": "deadbeef"}


def test_vote_completeness_requires_every_party():
    digest = transfer_digest([("t", {"recipient": B.address})])
    vote = CommitVote("d" * 64, digest)
    assert vote.add_signature(A.public_hex, A.sign(vote_message("d" * 64, digest)))
    assert not vote.is_complete([A.public_hex, B.public_hex])
    assert vote.missing([A.public_hex, B.public_hex]) == [B.public_hex]
    assert vote.add_signature(B.public_hex, B.sign(vote_message("d" * 64, digest)))
    assert vote.is_complete([A.public_hex, B.public_hex])


def test_signature_over_wrong_digest_excluded():
    digest = transfer_digest([("t", {"recipient": B.address})])
    other = transfer_digest([("t", {"recipient": A.address})])
    vote = CommitVote("d" * 64, digest)
    # Party signed a different digest: the signature must not be counted.
    assert not vote.add_signature(A.public_hex, A.sign(vote_message("d" * 64, other)))
    assert vote.signatures == {}


def test_vote_roundtrip_preserves_verification():
    digest = transfer_digest([("t", {"recipient": B.address})])
    vote = CommitVote("d" * 64, digest)
    vote.add_signature(A.public_hex, A.sign(vote_message("d" * 64, digest)))
    restored = CommitVote.from_json(vote.to_json())
    assert restored.is_complete([A.public_hex])


def test_abort_request_verification():
    request = AbortRequest.signed(A, "d" * 64, "testing")
    assert request.verify()
    forged = AbortRequest(request.deal_id, B.public_hex, request.reason,
                          request.signature)
    assert not forged.verify()


def test_transfer_digest_sensitive_to_order_and_content():
    plan_a = ("c1", {"transfers": [{"from": "x", "to": "y", "amount": 5}]})
    plan_b = ("c2", {"transfers": []})
    assert transfer_digest([plan_a, plan_b]) != transfer_digest([plan_b, plan_a])
    tweaked = ("c1", {"transfers": [{"from": "x", "to": "y", "amount": 6}]})
    assert transfer_digest([plan_a, plan_b]) != transfer_digest([tweaked, plan_b])
