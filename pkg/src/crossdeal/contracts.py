"""Escrow contracts: phase machines that hold assets between deposit and conclusion.

Two kinds exist: a ticket escrow holding one NFT on the asset chain, and a
coin escrow holding fungible deposits on a payment chain. Both walk the
same phase machine

    Deployed -> Escrowed -> TransferSpecified -> Committed | Aborted

and release assets only against an inclusion attestation from the event
log: a commit needs a vote signed by every deal party over the stored plan
digest, an abort needs a logged abort request from a party or the deal
service. Commit and abort are terminal, so a contract follows at most one
conclusion in its lifetime.

Empty contracts (no deposits yet) may be specified with an empty plan and
may be aborted; this keeps all-chain conclusions possible when some chain
received no bids.

Contracts run inside their host ledger's single-writer queue. The `host`
passed to every call exposes the only mutations a contract may perform:

    host.transfer(src, dst, amount)      fungible move, raises on overdraft
    host.move_nft(nft_id, owner, dst)    NFT move, checks current owner
    host.balance(account)                read
    host.emit(kind, payload)             append a chain event
"""

from __future__ import annotations

from enum import Enum

from . import eventlog
from .deal import (
    AbortRequest,
    CommitVote,
    abort_conclusion_payload,
    commit_conclusion_payload,
)
from .eventlog import InclusionAttestation, RecordKind, verify_attestation


class EscrowPhase(str, Enum):
    DEPLOYED = "Deployed"
    ESCROWED = "Escrowed"
    TRANSFER_SPECIFIED = "TransferSpecified"
    COMMITTED = "Committed"
    ABORTED = "Aborted"


TERMINAL_PHASES = (EscrowPhase.COMMITTED, EscrowPhase.ABORTED)


class ContractError(Exception):
    """Rejects the enclosing transaction; the ledger leaves state untouched."""

    def __init__(self, code: str, reason: str = ""):
        super().__init__(f"{code}: {reason}" if reason else code)
        self.code = code
        self.reason = reason


class _EscrowBase:
    kind = "escrow"

    def __init__(self, address: str, init: dict):
        party_keys = list(init.get("party_keys") or [])
        log_keys = list(init.get("log_keys") or [])
        if not party_keys:
            raise ContractError("BadParams", "empty party key set")
        if not log_keys:
            raise ContractError("BadParams", "no log attestation keys")
        if not init.get("deal_id"):
            raise ContractError("BadParams", "missing deal_id")
        self.address = address
        self.deal_id: str = init["deal_id"]
        self.phase = EscrowPhase.DEPLOYED
        self.party_keys = party_keys
        self.log_keys = log_keys
        self.service_key: str = init.get("service_key", "")
        self.specifier_account: str = init.get("specifier_account", "")
        self.deal_digest: str | None = None

    # -- guards ---------------------------------------------------------

    def _require_phase(self, *allowed: EscrowPhase) -> None:
        if self.phase not in allowed:
            raise ContractError(
                "WrongPhase",
                f"phase is {self.phase.value}, needs {'/'.join(p.value for p in allowed)}",
            )

    def _check_commit(self, args: dict) -> CommitVote:
        vote = CommitVote.from_json(args["vote"])
        attestation = InclusionAttestation.from_json(args["attestation"])
        if vote.deal_id != self.deal_id:
            raise ContractError("BadAttestation", "vote is for another deal")
        if not vote.is_complete(self.party_keys):
            raise ContractError(
                "IncompleteVote", f"{len(vote.missing(self.party_keys))} signature(s) missing"
            )
        if vote.transfer_digest != self.deal_digest:
            raise ContractError("DigestMismatch", "vote digest differs from stored plan digest")
        expected = eventlog.record_hash(
            self.deal_id, RecordKind.CONCLUSION, commit_conclusion_payload(vote)
        )
        if attestation.topic != self.deal_id or not verify_attestation(
            attestation, expected, self.log_keys
        ):
            raise ContractError("BadAttestation", "attestation does not bind this commit vote")
        return vote

    def _check_abort(self, args: dict) -> AbortRequest:
        request = AbortRequest.from_json(args["request"])
        attestation = InclusionAttestation.from_json(args["attestation"])
        if request.deal_id != self.deal_id:
            raise ContractError("BadAttestation", "abort request is for another deal")
        if not request.verify():
            raise ContractError("BadAttestation", "abort request signature invalid")
        if request.requester not in self.party_keys and request.requester != self.service_key:
            raise ContractError("BadAttestation", "abort requester is not a deal participant")
        expected = eventlog.record_hash(
            self.deal_id, RecordKind.CONCLUSION, abort_conclusion_payload(request)
        )
        if attestation.topic != self.deal_id or not verify_attestation(
            attestation, expected, self.log_keys
        ):
            raise ContractError("BadAttestation", "attestation does not bind this abort")
        return request

    def _check_specifier(self, caller: str) -> None:
        if caller != self.specifier_account:
            raise ContractError("BadSignature", "only the deal specifier may set the plan")

    # -- dispatch ---------------------------------------------------------

    def call(self, method: str, host, caller: str, args: dict) -> dict:
        handler = getattr(self, f"op_{method}", None)
        if handler is None:
            raise ContractError("BadParams", f"unknown method {method!r}")
        return handler(host, caller, args)


class TicketEscrow(_EscrowBase):
    """Holds the auctioned NFT and mirrors bids relayed from the coin chains."""

    kind = "TicketEscrow"

    def __init__(self, address: str, init: dict):
        super().__init__(address, init)
        if not init.get("ticket"):
            raise ContractError("BadParams", "missing ticket id")
        self.ticket: str = init["ticket"]
        self.depositor: str | None = None
        self.specified_recipient: str | None = None
        self.relayed_bids: list[dict] = []
        self._relayed_seen: set[tuple[str, int]] = set()

    def op_deposit(self, host, caller: str, args: dict) -> dict:
        self._require_phase(EscrowPhase.DEPLOYED)
        host.move_nft(self.ticket, caller, self.address)
        self.depositor = caller
        self.phase = EscrowPhase.ESCROWED
        host.emit("Escrowed", {"deal_id": self.deal_id, "ticket": self.ticket, "from": caller})
        return {"phase": self.phase.value}

    def op_relay_bid(self, host, caller: str, args: dict) -> dict:
        # Informational mirror of coin-chain deposits; duplicates are no-ops.
        self._require_phase(EscrowPhase.ESCROWED, EscrowPhase.TRANSFER_SPECIFIED)
        key = (args["origin_chain"], int(args["origin_seq"]))
        if key in self._relayed_seen:
            return {"duplicate": True}
        self._relayed_seen.add(key)
        bid = {
            "origin_chain": args["origin_chain"],
            "bidder": args["bidder"],
            "amount": int(args["amount"]),
            "origin_seq": int(args["origin_seq"]),
            "log_seq": int(args["log_seq"]),
            "withdrawn": bool(args.get("withdrawn", False)),
        }
        self.relayed_bids.append(bid)
        host.emit("BidRelayed", {"deal_id": self.deal_id, **bid})
        return {"relayed": len(self.relayed_bids)}

    def op_specify_transfer(self, host, caller: str, args: dict) -> dict:
        self._require_phase(EscrowPhase.ESCROWED)
        self._check_specifier(caller)
        recipient = args["plan"].get("recipient")
        if not recipient:
            raise ContractError("BadParams", "ticket plan needs a recipient")
        self.specified_recipient = recipient
        self.deal_digest = args["deal_digest"]
        self.phase = EscrowPhase.TRANSFER_SPECIFIED
        host.emit(
            "TransferSpecified",
            {"deal_id": self.deal_id, "recipient": recipient, "deal_digest": self.deal_digest},
        )
        return {"phase": self.phase.value}

    def op_commit(self, host, caller: str, args: dict) -> dict:
        self._require_phase(EscrowPhase.TRANSFER_SPECIFIED)
        self._check_commit(args)
        host.move_nft(self.ticket, self.address, self.specified_recipient)
        self.phase = EscrowPhase.COMMITTED
        host.emit(
            "Committed",
            {"deal_id": self.deal_id, "ticket": self.ticket, "recipient": self.specified_recipient},
        )
        return {"phase": self.phase.value, "ticket_owner": self.specified_recipient}

    def op_abort(self, host, caller: str, args: dict) -> dict:
        self._require_phase(
            EscrowPhase.DEPLOYED, EscrowPhase.ESCROWED, EscrowPhase.TRANSFER_SPECIFIED
        )
        self._check_abort(args)
        if self.depositor is not None:
            host.move_nft(self.ticket, self.address, self.depositor)
        self.phase = EscrowPhase.ABORTED
        host.emit("Aborted", {"deal_id": self.deal_id, "ticket": self.ticket})
        return {"phase": self.phase.value}

    def state_view(self) -> dict:
        return {
            "kind": self.kind,
            "address": self.address,
            "deal_id": self.deal_id,
            "phase": self.phase.value,
            "ticket": self.ticket,
            "depositor": self.depositor,
            "specified_recipient": self.specified_recipient,
            "deal_digest": self.deal_digest,
            "relayed_bids": list(self.relayed_bids),
            "party_keys": sorted(self.party_keys),
            "log_keys": sorted(self.log_keys),
            "service_key": self.service_key,
            "specifier_account": self.specifier_account,
        }


class CoinEscrow(_EscrowBase):
    """Holds fungible bid deposits on one payment chain."""

    kind = "CoinEscrow"

    def __init__(self, address: str, init: dict):
        super().__init__(address, init)
        self.deposits: dict[str, int] = {}
        self.transfers: list[dict] | None = None  # [{"from", "to", "amount"}]

    def op_deposit(self, host, caller: str, args: dict) -> dict:
        self._require_phase(EscrowPhase.DEPLOYED, EscrowPhase.ESCROWED)
        amount = int(args["amount"])
        if amount <= 0:
            raise ContractError("ZeroAmount", "deposit must be positive")
        host.transfer(caller, self.address, amount)
        self.deposits[caller] = self.deposits.get(caller, 0) + amount
        self.phase = EscrowPhase.ESCROWED
        host.emit(
            "Escrowed",
            {
                "deal_id": self.deal_id,
                "bidder": caller,
                "amount": amount,
                "total": self.deposits[caller],
            },
        )
        return {"total": self.deposits[caller]}

    def op_withdraw_bid(self, host, caller: str, args: dict) -> dict:
        # Unilateral before the plan is set; forbidden afterwards.
        self._require_phase(EscrowPhase.ESCROWED)
        amount = self.deposits.get(caller, 0)
        if amount <= 0:
            raise ContractError("NoDeposit", "caller has no escrowed bid")
        host.transfer(self.address, caller, amount)
        del self.deposits[caller]
        host.emit(
            "BidWithdrawn", {"deal_id": self.deal_id, "bidder": caller, "amount": amount}
        )
        return {"refunded": amount}

    def op_specify_transfer(self, host, caller: str, args: dict) -> dict:
        self._require_phase(EscrowPhase.DEPLOYED, EscrowPhase.ESCROWED)
        self._check_specifier(caller)
        transfers = [
            {"from": t["from"], "to": t["to"], "amount": int(t["amount"])}
            for t in args["plan"].get("transfers", [])
        ]
        outgoing: dict[str, int] = {}
        for t in transfers:
            if t["amount"] <= 0:
                raise ContractError("BadParams", "plan amounts must be positive")
            outgoing[t["from"]] = outgoing.get(t["from"], 0) + t["amount"]
        for bidder, total in outgoing.items():
            if total > self.deposits.get(bidder, 0):
                raise ContractError(
                    "PlanExceedsDeposits",
                    f"plan moves {total} of {self.deposits.get(bidder, 0)} deposited",
                )
        self.transfers = transfers
        self.deal_digest = args["deal_digest"]
        self.phase = EscrowPhase.TRANSFER_SPECIFIED
        host.emit(
            "TransferSpecified",
            {"deal_id": self.deal_id, "transfers": transfers, "deal_digest": self.deal_digest},
        )
        return {"phase": self.phase.value}

    def op_commit(self, host, caller: str, args: dict) -> dict:
        self._require_phase(EscrowPhase.TRANSFER_SPECIFIED)
        self._check_commit(args)
        remaining = dict(self.deposits)
        for t in self.transfers or []:
            host.transfer(self.address, t["to"], t["amount"])
            remaining[t["from"]] -= t["amount"]
        # Deposits the plan left untouched go back to their depositors.
        refunds = {}
        for bidder, left in remaining.items():
            if left > 0:
                host.transfer(self.address, bidder, left)
                refunds[bidder] = left
        self.deposits = {}
        self.phase = EscrowPhase.COMMITTED
        host.emit(
            "Committed",
            {"deal_id": self.deal_id, "transfers": self.transfers, "refunds": refunds},
        )
        return {"phase": self.phase.value}

    def op_abort(self, host, caller: str, args: dict) -> dict:
        self._require_phase(
            EscrowPhase.DEPLOYED, EscrowPhase.ESCROWED, EscrowPhase.TRANSFER_SPECIFIED
        )
        self._check_abort(args)
        for bidder, amount in self.deposits.items():
            host.transfer(self.address, bidder, amount)
        refunded = dict(self.deposits)
        self.deposits = {}
        self.phase = EscrowPhase.ABORTED
        host.emit("Aborted", {"deal_id": self.deal_id, "refunds": refunded})
        return {"phase": self.phase.value}

    def state_view(self) -> dict:
        return {
            "kind": self.kind,
            "address": self.address,
            "deal_id": self.deal_id,
            "phase": self.phase.value,
            "deposits": dict(self.deposits),
            "transfers": list(self.transfers) if self.transfers is not None else None,
            "deal_digest": self.deal_digest,
            "party_keys": sorted(self.party_keys),
            "log_keys": sorted(self.log_keys),
            "service_key": self.service_key,
            "specifier_account": self.specifier_account,
        }


CONTRACT_KINDS = {
    "TicketEscrow": TicketEscrow,
    "CoinEscrow": CoinEscrow,
}
