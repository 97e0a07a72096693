"""Deal identity, commit votes, and abort requests.

A deal is an agreement by a fixed set of parties to exchange assets held
on different chains. Its id is the hash of the canonical descriptor body,
one escrow contract is deployed per involved chain, and the deal concludes
through exactly one logged conclusion: a commit vote carrying a verifying
signature from every party, or an abort request from any single party (or
the coordinating service's watchdog).

The transfer digest signed in a commit vote is the hash of every
contract's specified plan, concatenated in deal chain order. One vote
therefore covers all chains at once; plans cannot be mixed and matched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import codec, keys
from .eventlog import ConclusionKind


@dataclass(frozen=True)
class Party:
    role: str  # "auctioneer", "bidder", "lender", ...
    name: str
    account: str
    pubkey: str

    def to_json(self) -> dict:
        return {
            "role": self.role,
            "name": self.name,
            "account": self.account,
            "pubkey": self.pubkey,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Party":
        return cls(obj["role"], obj["name"], obj["account"], obj["pubkey"])


@dataclass
class DealDescriptor:
    """Identity and wiring of one cross-chain deal.

    `chains` fixes the deal order used for the transfer digest; `contracts`
    is filled in during clearing (one escrow contract per chain).
    """

    deal_id: str
    parties: list[Party]
    specifier: int  # index into parties; authorizes transfer plans
    chains: list[str]
    timeout: int  # logical-time deadline for a conclusion
    contracts: dict[str, str] = field(default_factory=dict)  # chain_id -> address

    def __post_init__(self):
        if not self.parties:
            raise ValueError("deal needs at least one party")
        if not 0 <= self.specifier < len(self.parties):
            raise ValueError("specifier index out of range")

    @staticmethod
    def derive_id(parties: list[Party], specifier: int, chains: list[str], timeout: int) -> str:
        body = [
            "deal",
            [p.to_json() for p in parties],
            specifier,
            list(chains),
            timeout,
        ]
        return codec.hexdigest(body)

    @classmethod
    def create(cls, parties: list[Party], specifier: int, chains: list[str], timeout: int) -> "DealDescriptor":
        deal_id = cls.derive_id(parties, specifier, chains, timeout)
        return cls(deal_id, list(parties), specifier, list(chains), timeout)

    @property
    def party_keys(self) -> list[str]:
        return [p.pubkey for p in self.parties]

    @property
    def specifier_party(self) -> Party:
        return self.parties[self.specifier]

    def party_by_key(self, pubkey: str) -> Party | None:
        for p in self.parties:
            if p.pubkey == pubkey:
                return p
        return None

    def to_json(self) -> dict:
        return {
            "deal_id": self.deal_id,
            "parties": [p.to_json() for p in self.parties],
            "specifier": self.specifier,
            "chains": list(self.chains),
            "timeout": self.timeout,
            "contracts": dict(self.contracts),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DealDescriptor":
        return cls(
            deal_id=obj["deal_id"],
            parties=[Party.from_json(p) for p in obj["parties"]],
            specifier=obj["specifier"],
            chains=list(obj["chains"]),
            timeout=obj["timeout"],
            contracts=dict(obj["contracts"]),
        )


def transfer_digest(plans_in_deal_order: list[tuple[str, dict]]) -> str:
    """Digest over [(chain_id, plan), ...] in the deal's chain order."""
    return codec.hexdigest(["transfer-plan", [[c, p] for c, p in plans_in_deal_order]])


def vote_message(deal_id: str, digest: str) -> bytes:
    """What each party signs to approve the specified transfers."""
    return codec.encode(["commit-vote", deal_id, digest])


@dataclass
class CommitVote:
    deal_id: str
    transfer_digest: str
    signatures: dict[str, str] = field(default_factory=dict)  # party pubkey -> sig

    def add_signature(self, pubkey: str, signature: str) -> bool:
        """Record a signature if it verifies; returns whether it was accepted."""
        if not keys.verify(pubkey, vote_message(self.deal_id, self.transfer_digest), signature):
            return False
        self.signatures[pubkey] = signature
        return True

    def is_complete(self, party_keys: list[str]) -> bool:
        message = vote_message(self.deal_id, self.transfer_digest)
        return all(
            key in self.signatures and keys.verify(key, message, self.signatures[key])
            for key in party_keys
        )

    def missing(self, party_keys: list[str]) -> list[str]:
        return [k for k in party_keys if k not in self.signatures]

    def to_json(self) -> dict:
        return {
            "deal_id": self.deal_id,
            "transfer_digest": self.transfer_digest,
            "signatures": dict(self.signatures),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CommitVote":
        return cls(obj["deal_id"], obj["transfer_digest"], dict(obj["signatures"]))


def abort_message(deal_id: str, requester: str, reason: str) -> bytes:
    return codec.encode(["abort-request", deal_id, requester, reason])


@dataclass
class AbortRequest:
    deal_id: str
    requester: str  # pubkey
    reason: str
    signature: str

    @classmethod
    def signed(cls, keypair, deal_id: str, reason: str) -> "AbortRequest":
        sig = keypair.sign(abort_message(deal_id, keypair.public_hex, reason))
        return cls(deal_id, keypair.public_hex, reason, sig)

    def verify(self) -> bool:
        return keys.verify(
            self.requester,
            abort_message(self.deal_id, self.requester, self.reason),
            self.signature,
        )

    def to_json(self) -> dict:
        return {
            "deal_id": self.deal_id,
            "requester": self.requester,
            "reason": self.reason,
            "signature": self.signature,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AbortRequest":
        return cls(obj["deal_id"], obj["requester"], obj["reason"], obj["signature"])


def commit_conclusion_payload(vote: CommitVote) -> dict:
    """Log payload for a commit conclusion; contracts recompute its hash."""
    return {
        "deal_id": vote.deal_id,
        "conclusion": ConclusionKind.COMMIT.value,
        "body": vote.to_json(),
    }


def abort_conclusion_payload(request: AbortRequest) -> dict:
    return {
        "deal_id": request.deal_id,
        "conclusion": ConclusionKind.ABORT.value,
        "body": request.to_json(),
    }
