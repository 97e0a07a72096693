"""The deal service and its peers as scheduler-driven actors.

The deal service is the semi-trusted coordinator for one cross-chain deal.
It watches the involved chains and relays escrow events onto the deal's
log topic and to the ticket contract (relayer role), asks every party to
validate and sign the specified transfers (signer role), concludes the
deal by appending exactly one conclusion to the event log, and then relays
the attested conclusion to every contract until each is terminal. A
journal of everything it has done lets a restarted service resume
mid-deal; all of its actions are idempotent, so re-delivery and re-relay
never change outcomes.

Party clients hold the user-side keys. They perform scripted actions
(deposits, bids, withdrawals, ending an auction), and answer the service's
validate-and-sign requests after independently recomputing the transfer
plans from the log and chains. A party flagged as an equivocator also
races its own abort onto the log and relays conclusions selectively
(commit to one chain, abort to others): the attack the log's arbitration
must defeat.

Message schemas (JSON-shaped dicts):
  validate_and_sign: {deal_id, transfer_digest, plans: [[chain, plan]..]}
  signature:         {deal_id, pubkey, signature}
  reject:            {deal_id, pubkey, reason}
  abort_request:     {request: AbortRequest json}
"""

from __future__ import annotations

import json
import os

from . import eventlog
from .chain import Ledger, Receipt, call_payload, deploy_payload, sign_tx
from .contracts import TERMINAL_PHASES, EscrowPhase
from .deal import (
    AbortRequest,
    CommitVote,
    DealDescriptor,
    abort_conclusion_payload,
    commit_conclusion_payload,
    transfer_digest,
    vote_message,
)
from .eventlog import EventLog, RecordKind, append_signature
from .harness import Message, Scheduler
from .keys import KeyPair


class EngineError(Exception):
    def __init__(self, code: str, reason: str = ""):
        super().__init__(f"{code}: {reason}" if reason else code)
        self.code = code
        self.reason = reason


def chain_actor_name(chain_id: str) -> str:
    return f"chain:{chain_id}"


LOG_ACTOR = "log"


class ChainActor:
    """Delivers submitted transactions into a ledger and fans out its events."""

    def __init__(self, ledger: Ledger, subscribers: list[str] | None = None):
        self.ledger = ledger
        self.name = chain_actor_name(ledger.chain_id)
        self.subscribers = list(subscribers or [])

    def handle(self, msg: Message, ctx: Scheduler) -> None:
        if msg.kind != "submit":
            return
        tx = msg.payload["tx"]
        receipt = self.ledger.submit(tx)
        ctx.note(self.name, "tx", {
            "type": tx.payload.get("type"),
            "method": tx.payload.get("method", ""),
            "ok": receipt.ok,
            "code": receipt.error_code,
            "height": receipt.height,
        })
        ctx.send(msg.payload["reply_to"], "receipt",
                 {"tag": msg.payload.get("tag", ""), "receipt": receipt,
                  "chain_id": self.ledger.chain_id},
                 sender=self.name)
        for event in receipt.events:
            for sub in self.subscribers:
                ctx.send(sub, "chain_event", {"event": event}, sender=self.name)


class LogActor:
    """Serialized append path of the event log."""

    def __init__(self, log: EventLog):
        self.log = log
        self.name = LOG_ACTOR

    def handle(self, msg: Message, ctx: Scheduler) -> None:
        if msg.kind != "append":
            return
        p = msg.payload
        try:
            offset = self.log.append(p["topic"], p["record_kind"], p["record"],
                                     p["producer"], p["sig"])
        except eventlog.ConclusionExists as err:
            ctx.note(self.name, "append_conflict",
                     {"topic": p["topic"], "existing": err.existing_kind})
            ctx.send(p["reply_to"], "append_conflict",
                     {"tag": p.get("tag", ""), "topic": p["topic"],
                      "existing_kind": err.existing_kind, "offset": err.offset},
                     sender=self.name)
            return
        except eventlog.BadSignature:
            ctx.send(p["reply_to"], "append_err",
                     {"tag": p.get("tag", ""), "topic": p["topic"], "error": "BadSignature"},
                     sender=self.name)
            return
        ctx.note(self.name, "append",
                 {"topic": p["topic"][:8],
                  "record_kind": getattr(p["record_kind"], "value", p["record_kind"]),
                  "offset": offset})
        ctx.send(p["reply_to"], "append_ok",
                 {"tag": p.get("tag", ""), "topic": p["topic"], "offset": offset},
                 sender=self.name)


class Journal:
    """Append-only JSON-lines key store; a restarted service replays it."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.state: dict = {}
        if path and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        entry = json.loads(line)
                        self.state[entry["key"]] = entry["value"]

    def get(self, key: str, default=None):
        return self.state.get(key, default)

    def set(self, key: str, value) -> None:
        self.state[key] = value
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "value": value}, sort_keys=True) + "\n")

    def setdefault(self, key: str, value):
        if key not in self.state:
            self.set(key, value)
        return self.state[key]


class _Submitter:
    """One-inflight-per-chain transaction discipline shared by actors.

    Nonces are read at send time, so a rejected or re-ordered submission
    never poisons the next one; stale duplicate receipts are ignored by tag.
    """

    def __init__(self, name: str, keypair: KeyPair, ledgers: dict[str, Ledger]):
        self.name = name
        self.keypair = keypair
        self.ledgers = ledgers
        # Safe only without duplicate-delivery faults (the real-time gateway):
        # there a BadNonce can only mean another deal won the nonce race.
        self.retry_bad_nonce = False
        self._queue: dict[str, list[tuple[dict, str]]] = {}
        self._inflight_tag: dict[str, str | None] = {}
        self._inflight_payload: dict[str, dict] = {}
        self._tag_counter = 0

    def submit_tx(self, ctx: Scheduler, chain_id: str, payload: dict, tag: str = "") -> None:
        self._tag_counter += 1
        tag = tag or f"tx-{self._tag_counter}"
        self._queue.setdefault(chain_id, []).append((payload, tag))
        self._pump(ctx, chain_id)

    def _pump(self, ctx: Scheduler, chain_id: str) -> None:
        if self._inflight_tag.get(chain_id) is not None:
            return
        queue = self._queue.get(chain_id) or []
        if not queue:
            return
        payload, tag = queue.pop(0)
        ledger = self.ledgers[chain_id]
        tx = sign_tx(self.keypair, chain_id,
                     ledger.next_nonce(self.keypair.address), payload)
        self._inflight_tag[chain_id] = tag
        self._inflight_payload[chain_id] = payload
        ctx.send(chain_actor_name(chain_id), "submit",
                 {"tx": tx, "reply_to": self.name, "tag": tag}, sender=self.name)

    def take_receipt(self, msg: Message, ctx: Scheduler) -> tuple[str, Receipt] | None:
        """Match a receipt to its inflight tag; None for stale duplicates."""
        chain_id = msg.payload["chain_id"]
        tag = msg.payload["tag"]
        if self._inflight_tag.get(chain_id) != tag:
            return None
        self._inflight_tag[chain_id] = None
        receipt: Receipt = msg.payload["receipt"]
        if not receipt.ok and receipt.error_code == "BadNonce" and self.retry_bad_nonce:
            payload = self._inflight_payload.pop(chain_id, None)
            if payload is not None:
                self._queue.setdefault(chain_id, []).insert(0, (payload, tag))
            self._pump(ctx, chain_id)
            return None
        self._inflight_payload.pop(chain_id, None)
        self._pump(ctx, chain_id)
        return tag, receipt

    def reset_inflight(self) -> None:
        self._queue.clear()
        self._inflight_tag.clear()
        self._inflight_payload.clear()


class PartyClient(_Submitter):
    """User-side actor: scripted actions, validation, optional equivocation."""

    def __init__(self, name: str, keypair: KeyPair, ledgers: dict[str, Ledger],
                 log: EventLog, svc_name: str = "svc"):
        super().__init__(name, keypair, ledgers)
        self.log = log
        self.svc_name = svc_name
        self.descriptor: DealDescriptor | None = None
        self.actions: dict = {}          # action name -> fn(party, ctx, params)
        self.validator = None            # fn(party, plans) -> (ok, reason)
        self.equivocate = False
        self.reject_votes = False
        self.continuations: dict = {}    # append tag -> fn(party, ctx, payload)
        self._pokes_left = 0

    # -- log append helper --------------------------------------------------

    def append_record(self, ctx: Scheduler, topic: str, kind: str, record: dict,
                      tag: str = "") -> None:
        sig = append_signature(self.keypair, topic, kind, record)
        ctx.send(LOG_ACTOR, "append",
                 {"topic": topic, "record_kind": kind, "record": record,
                  "producer": self.keypair.public_hex, "sig": sig,
                  "reply_to": self.name, "tag": tag}, sender=self.name)

    # -- message handling ------------------------------------------------------

    def handle(self, msg: Message, ctx: Scheduler) -> None:
        if msg.kind == "act":
            action = self.actions.get(msg.payload["action"])
            if action is None:
                ctx.note(self.name, "unknown_action", {"action": msg.payload["action"]})
                return
            action(self, ctx, msg.payload.get("params", {}))
        elif msg.kind == "receipt":
            matched = self.take_receipt(msg, ctx)
            if matched:
                tag, receipt = matched
                cont = self.continuations.pop(tag, None)
                if cont:
                    cont(self, ctx, receipt)
        elif msg.kind in ("append_ok", "append_conflict", "append_err"):
            cont = self.continuations.pop(msg.payload.get("tag", ""), None)
            if cont:
                cont(self, ctx, msg.payload)
        elif msg.kind == "validate_and_sign":
            self._validate_and_sign(msg.payload, ctx)
        elif msg.kind == "adversary_poke":
            self._adversary_poke(ctx)

    def _validate_and_sign(self, payload: dict, ctx: Scheduler) -> None:
        deal_id = payload["deal_id"]
        plans = [(chain, plan) for chain, plan in payload["plans"]]
        digest = payload["transfer_digest"]
        ok = transfer_digest(plans) == digest
        reason = "" if ok else "digest does not match presented plans"
        if ok and self.reject_votes:
            ok, reason = False, "party declines"
        if ok and self.validator is not None:
            ok, reason = self.validator(self, plans)
        if ok:
            signature = self.keypair.sign(vote_message(deal_id, digest))
            ctx.note(self.name, "signed", {"deal_id": deal_id[:8]})
            ctx.send(self.svc_name, "signature",
                     {"deal_id": deal_id, "pubkey": self.keypair.public_hex,
                      "signature": signature}, sender=self.name)
        else:
            ctx.note(self.name, "rejected_vote", {"reason": reason})
            ctx.send(self.svc_name, "reject",
                     {"deal_id": deal_id, "pubkey": self.keypair.public_hex,
                      "reason": reason}, sender=self.name)
        if self.equivocate and self.descriptor is not None:
            self._launch_equivocation(ctx)

    # -- the adversary -----------------------------------------------------------

    def _launch_equivocation(self, ctx: Scheduler) -> None:
        deal_id = self.descriptor.deal_id
        request = AbortRequest.signed(self.keypair, deal_id, "equivocation")
        record = abort_conclusion_payload(request)
        ctx.note(self.name, "equivocate", {"deal_id": deal_id[:8]})
        # Race the abort against the service's commit; the jitter makes both
        # sides of the log race reachable across seeds.
        sig = append_signature(self.keypair, deal_id, RecordKind.CONCLUSION, record)
        ctx.send(LOG_ACTOR, "append",
                 {"topic": deal_id, "record_kind": RecordKind.CONCLUSION,
                  "record": record, "producer": self.keypair.public_hex, "sig": sig,
                  "reply_to": self.name, "tag": "equiv-abort"},
                 sender=self.name, delay=ctx.rng.randint(0, 30))
        self._pokes_left = 8
        ctx.send(self.name, "adversary_poke", {}, delay=2, reliable=True)

    def _adversary_poke(self, ctx: Scheduler) -> None:
        if self._pokes_left <= 0 or self.descriptor is None:
            return
        self._pokes_left -= 1
        deal = self.descriptor
        conclusions = [r for r in self.log.read(deal.deal_id)
                       if r.kind == RecordKind.CONCLUSION]
        ticket_chain = deal.chains[0]
        for record in conclusions:
            attestation = self.log.attest(deal.deal_id, record.offset)
            kind = record.payload["conclusion"]
            # Split-brain relay: push commit at the ticket chain only, abort
            # at the coin chains only. Arbitration makes this harmless.
            if kind == "commit":
                targets = [ticket_chain]
                args = {"vote": record.payload["body"],
                        "attestation": attestation.to_json()}
                method = "commit"
            else:
                targets = deal.chains[1:]
                args = {"request": record.payload["body"],
                        "attestation": attestation.to_json()}
                method = "abort"
            for chain_id in targets:
                address = deal.contracts.get(chain_id)
                if address is None:
                    continue
                view = self.ledgers[chain_id].contract_state(address)
                if view["phase"] in (p.value for p in TERMINAL_PHASES):
                    continue
                self.submit_tx(ctx, chain_id, call_payload(address, method, args))
        if self._pokes_left > 0:
            ctx.send(self.name, "adversary_poke", {}, delay=3, reliable=True)


class DealService(_Submitter):
    """Relayer, signer, concluder, and watchdog for one deal."""

    def __init__(self, keypair: KeyPair, descriptor: DealDescriptor,
                 ledgers: dict[str, Ledger], log: EventLog,
                 party_actors: dict[str, str], name: str = "svc",
                 journal: Journal | None = None,
                 vote_timeout: int = 150, sweep_interval: int = 25):
        super().__init__(name, keypair, ledgers)
        self.descriptor = descriptor
        self.log = log
        self.party_actors = dict(party_actors)  # pubkey -> actor name
        self.journal = journal or Journal()
        self.vote_timeout = vote_timeout
        self.sweep_interval = sweep_interval
        self._sweeping = False
        self._pending_conclusion: tuple[str, dict, int] | None = None
        self._rates_cache: dict[str, list[int]] | None = None

    # -- lifecycle ------------------------------------------------------------

    def start(self, ctx: Scheduler) -> None:
        delay = max(0, self.descriptor.timeout - ctx.now)
        ctx.send(self.name, "watchdog", {}, delay=delay, reliable=True)

    def on_restart(self, ctx: Scheduler) -> None:
        self.reset_inflight()
        self._sweeping = False
        self._pending_conclusion = None
        self.start(ctx)
        self._arm_sweep(ctx)
        # Replay whatever happened while down: chain events and the log.
        for chain_id in self.descriptor.chains:
            for event in self.ledgers[chain_id].events_since(0):
                self._on_chain_event(event, ctx)
        self._resend_relay_mirrors(ctx)
        conclusion = self.log.conclusion_for(self.descriptor.deal_id)
        if conclusion is not None:
            self._record_conclusion(conclusion[0], conclusion[2])
            self._relay_conclusion(ctx)
        elif self.journal.get("collection_started"):
            self._rerequest_signatures(ctx)

    def _resend_relay_mirrors(self, ctx: Scheduler) -> None:
        """Re-push relayed bids to the ticket contract; duplicates are no-ops."""
        deal = self.descriptor
        ticket_chain = deal.chains[0]
        address = deal.contracts[ticket_chain]
        for key, offset in sorted(self.journal.get("relayed", {}).items()):
            if offset is None:
                continue
            records = self.log.read(deal.deal_id, offset)
            if not records:
                continue
            record = records[0].payload
            chain_id, seq = key.rsplit(":", 1)
            self.submit_tx(ctx, ticket_chain, call_payload(address, "relay_bid", {
                "origin_chain": chain_id,
                "bidder": record.get("bidder", ""),
                "amount": record.get("amount", 0),
                "origin_seq": int(seq),
                "log_seq": offset,
                "withdrawn": record.get("withdrawn", False),
            }))

    def _rerequest_signatures(self, ctx: Scheduler) -> None:
        stored = self.journal.get("vote")
        if stored is None:
            return
        vote = CommitVote.from_json(stored)
        missing = set(vote.missing(self.descriptor.party_keys))
        if not missing:
            self.conclude_commit(vote, ctx)
            return
        plans = self._current_plans()
        if plans is None:
            return
        ctx.note(self.name, "rerequest_signatures", {"missing": len(missing)})
        for party in self.descriptor.parties:
            if party.pubkey not in missing:
                continue
            actor = self.party_actors.get(party.pubkey)
            if actor:
                ctx.send(actor, "validate_and_sign",
                         {"deal_id": self.descriptor.deal_id,
                          "transfer_digest": vote.transfer_digest,
                          "plans": [[c, p] for c, p in plans]}, sender=self.name)
        ctx.send(self.name, "vote_deadline", {}, delay=self.vote_timeout, reliable=True)

    def _current_plans(self) -> list[tuple[str, dict]] | None:
        deal = self.descriptor
        plans: list[tuple[str, dict]] = []
        for chain_id in deal.chains:
            view = self.ledgers[chain_id].contract_state(deal.contracts[chain_id])
            if view["deal_digest"] is None:
                return None
            if view["kind"] == "TicketEscrow":
                plans.append((chain_id, {"recipient": view["specified_recipient"]}))
            else:
                plans.append((chain_id, {"transfers": view["transfers"] or []}))
        return plans

    # -- message handling ---------------------------------------------------------

    def handle(self, msg: Message, ctx: Scheduler) -> None:
        if msg.kind == "chain_event":
            self._on_chain_event(msg.payload["event"], ctx)
        elif msg.kind == "receipt":
            self.take_receipt(msg, ctx)
        elif msg.kind == "append_ok":
            self._on_append_ok(msg.payload, ctx)
        elif msg.kind == "append_conflict":
            self._on_append_conflict(msg.payload, ctx)
        elif msg.kind == "signature":
            self._on_signature(msg.payload, ctx)
        elif msg.kind == "reject":
            self._on_reject(msg.payload, ctx)
        elif msg.kind == "abort_request":
            self._on_abort_request(msg.payload, ctx)
        elif msg.kind == "vote_deadline":
            self._on_vote_deadline(ctx)
        elif msg.kind == "watchdog":
            self._on_watchdog(ctx)
        elif msg.kind == "sweep":
            self._on_sweep(ctx)

    # -- relayer role ----------------------------------------------------------------

    def _on_chain_event(self, event, ctx: Scheduler) -> None:
        deal = self.descriptor
        if event.contract != deal.contracts.get(event.chain_id):
            return
        if event.kind in ("Escrowed", "BidWithdrawn") and event.chain_id != deal.chains[0]:
            self._relay_bid_event(event, ctx)
        elif event.kind == "TransferSpecified":
            self._maybe_collect_vote(ctx)
        elif event.kind in ("Committed", "Aborted"):
            receipts = dict(self.journal.get("phases", {}))
            receipts[event.chain_id] = event.kind
            self.journal.set("phases", receipts)

    def _relay_bid_event(self, event, ctx: Scheduler) -> None:
        key = f"{event.chain_id}:{event.seq}"
        relayed = self.journal.get("relayed", {})
        if key in relayed:
            return
        relayed = dict(relayed)
        relayed[key] = None  # pending a log offset
        self.journal.set("relayed", relayed)
        withdrawn = event.kind == "BidWithdrawn"
        record = {
            "deal_id": self.descriptor.deal_id,
            "auction_id": self.descriptor.deal_id,
            "chain": event.chain_id,
            "bidder": event.payload["bidder"],
            "amount": int(event.payload["amount"]),
            "total": 0 if withdrawn else int(event.payload["total"]),
            "origin_seq": event.seq,
            "withdrawn": withdrawn,
        }
        rate = self._topic_rates().get(event.chain_id)
        if rate is not None:
            record["rate"] = rate  # [numerator, denominator], fixed at creation
        self._append(ctx, RecordKind.BID, record, tag=f"bid:{key}")

    def _topic_rates(self) -> dict[str, list[int]]:
        """Exchange rates from the deal's published metadata, if any."""
        if self._rates_cache is None:
            rates: dict[str, list[int]] = {}
            for record in self.log.read(self.descriptor.deal_id):
                if record.kind == RecordKind.INFO and "auction" in record.payload:
                    rates = {c: list(pair) for c, pair in
                             record.payload["auction"].get("rates", {}).items()}
                    break
            self._rates_cache = rates
        return self._rates_cache

    def _on_append_ok(self, payload: dict, ctx: Scheduler) -> None:
        tag = payload.get("tag", "")
        if tag.startswith("bid:"):
            key = tag[4:]
            relayed = dict(self.journal.get("relayed", {}))
            if relayed.get(key) is not None:
                return  # duplicate reply
            offset = payload["offset"]
            relayed[key] = offset
            self.journal.set("relayed", relayed)
            chain_id, seq = key.rsplit(":", 1)
            records = self.log.read(self.descriptor.deal_id, offset)
            record = records[0].payload if records else {}
            ctx.note(self.name, "bid_relayed", {"chain": chain_id, "seq": int(seq),
                                                "offset": offset})
            ticket_chain = self.descriptor.chains[0]
            address = self.descriptor.contracts[ticket_chain]
            self.submit_tx(ctx, ticket_chain, call_payload(address, "relay_bid", {
                "origin_chain": chain_id,
                "bidder": record.get("bidder", ""),
                "amount": record.get("amount", 0),
                "origin_seq": int(seq),
                "log_seq": offset,
                "withdrawn": record.get("withdrawn", False),
            }))
        elif tag == "conclude":
            pending = self._pending_conclusion
            if pending is not None:
                kind = pending[0]
            else:
                logged = self.log.conclusion_for(self.descriptor.deal_id)
                if logged is None:
                    return  # stale duplicate reply
                kind = logged[0]
            self._record_conclusion(kind, payload["offset"])
            ctx.note(self.name, "conclusion_logged",
                     {"conclusion": kind, "offset": payload["offset"]})
            self._relay_conclusion(ctx)

    def _on_append_conflict(self, payload: dict, ctx: Scheduler) -> None:
        if payload.get("tag") != "conclude":
            return
        ctx.note(self.name, "conclusion_exists",
                 {"conclusion": payload["existing_kind"], "offset": payload["offset"]})
        self._record_conclusion(payload["existing_kind"], payload["offset"])
        self._relay_conclusion(ctx)

    # -- signer role --------------------------------------------------------------------

    def _maybe_collect_vote(self, ctx: Scheduler) -> None:
        if self.journal.get("collection_started"):
            return
        deal = self.descriptor
        plans = self._current_plans()
        if plans is None:
            return  # not every contract is specified yet
        digests = {
            self.ledgers[c].contract_state(deal.contracts[c])["deal_digest"]
            for c in deal.chains
        }
        if len(digests) != 1:
            ctx.note(self.name, "digest_mismatch_across_chains", {})
            return
        stored = digests.pop()
        if transfer_digest(plans) != stored:
            ctx.note(self.name, "stored_digest_inconsistent", {})
            return
        self.journal.set("collection_started", True)
        self.journal.set("vote", CommitVote(deal.deal_id, stored).to_json())
        ctx.note(self.name, "vote_collection", {"digest": stored[:8]})
        for party in deal.parties:
            actor = self.party_actors.get(party.pubkey)
            if actor:
                ctx.send(actor, "validate_and_sign",
                         {"deal_id": deal.deal_id, "transfer_digest": stored,
                          "plans": [[c, p] for c, p in plans]}, sender=self.name)
        ctx.send(self.name, "vote_deadline", {}, delay=self.vote_timeout, reliable=True)

    def _on_signature(self, payload: dict, ctx: Scheduler) -> None:
        if payload["deal_id"] != self.descriptor.deal_id:
            return
        stored = self.journal.get("vote")
        if stored is None or self.journal.get("conclusion"):
            return
        vote = CommitVote.from_json(stored)
        if not vote.add_signature(payload["pubkey"], payload["signature"]):
            ctx.note(self.name, "bad_party_signature", {})
            return
        self.journal.set("vote", vote.to_json())
        if vote.is_complete(self.descriptor.party_keys):
            self.conclude_commit(vote, ctx)

    def _on_reject(self, payload: dict, ctx: Scheduler) -> None:
        if payload["deal_id"] != self.descriptor.deal_id:
            return
        ctx.note(self.name, "party_rejected", {"reason": payload.get("reason", "")})
        self.conclude_abort(
            AbortRequest.signed(self.keypair, self.descriptor.deal_id,
                                f"party rejected: {payload.get('reason', '')}"),
            ctx,
        )

    def _on_vote_deadline(self, ctx: Scheduler) -> None:
        if self.journal.get("conclusion") or self._pending_conclusion is not None:
            return
        stored = self.journal.get("vote")
        if stored is None:
            return
        vote = CommitVote.from_json(stored)
        missing = vote.missing(self.descriptor.party_keys)
        if not missing:
            return
        ctx.note(self.name, "vote_timeout", {"missing": len(missing)})
        self.conclude_abort(
            AbortRequest.signed(self.keypair, self.descriptor.deal_id, "vote timeout"),
            ctx,
        )

    # -- abort intake ------------------------------------------------------------------------

    def _on_abort_request(self, payload: dict, ctx: Scheduler) -> None:
        request = AbortRequest.from_json(payload["request"])
        if request.deal_id != self.descriptor.deal_id or not request.verify():
            ctx.note(self.name, "abort_request_invalid", {})
            return
        if (request.requester not in self.descriptor.party_keys
                and request.requester != self.keypair.public_hex):
            ctx.note(self.name, "abort_request_nonparty", {})
            return
        self.conclude_abort(request, ctx)

    # -- conclusion ------------------------------------------------------------------------------

    def conclude_commit(self, vote: CommitVote, ctx: Scheduler) -> None:
        if self.journal.get("conclusion") or self._pending_conclusion is not None:
            return
        record = commit_conclusion_payload(vote)
        self._pending_conclusion = ("commit", record, 0)
        self._append(ctx, RecordKind.CONCLUSION, record, tag="conclude")

    def conclude_abort(self, request: AbortRequest, ctx: Scheduler) -> None:
        if self.journal.get("conclusion") or self._pending_conclusion is not None:
            return
        record = abort_conclusion_payload(request)
        self._pending_conclusion = ("abort", record, 0)
        self._append(ctx, RecordKind.CONCLUSION, record, tag="conclude")

    def _record_conclusion(self, kind: str, offset: int) -> None:
        if not self.journal.get("conclusion"):
            self.journal.set("conclusion", {"kind": kind, "offset": offset})
        self._pending_conclusion = None

    def _relay_conclusion(self, ctx: Scheduler) -> None:
        conclusion = self.journal.get("conclusion")
        if conclusion is None:
            return
        deal = self.descriptor
        records = self.log.read(deal.deal_id, conclusion["offset"])
        if not records:
            return
        record = records[0]
        attestation = self.log.attest(deal.deal_id, record.offset)
        kind = record.payload["conclusion"]
        for chain_id in deal.chains:
            address = deal.contracts[chain_id]
            view = self.ledgers[chain_id].contract_state(address)
            if view["phase"] in (p.value for p in TERMINAL_PHASES):
                continue
            if kind == "commit":
                args = {"vote": record.payload["body"],
                        "attestation": attestation.to_json()}
                self.submit_tx(ctx, chain_id, call_payload(address, "commit", args),
                               tag=f"conclude:{chain_id}")
            else:
                args = {"request": record.payload["body"],
                        "attestation": attestation.to_json()}
                self.submit_tx(ctx, chain_id, call_payload(address, "abort", args),
                               tag=f"conclude:{chain_id}")
        self._arm_sweep(ctx)

    # -- liveness ------------------------------------------------------------------------------------

    def _on_watchdog(self, ctx: Scheduler) -> None:
        if self.log.conclusion_for(self.descriptor.deal_id) is None:
            ctx.note(self.name, "watchdog_abort", {})
            self.conclude_abort(
                AbortRequest.signed(self.keypair, self.descriptor.deal_id, "deal timeout"),
                ctx,
            )
        self._arm_sweep(ctx)

    def _arm_sweep(self, ctx: Scheduler) -> None:
        if not self._sweeping:
            self._sweeping = True
            ctx.send(self.name, "sweep", {}, delay=self.sweep_interval, reliable=True)

    def _on_sweep(self, ctx: Scheduler) -> None:
        self._sweeping = False
        conclusion = self.log.conclusion_for(self.descriptor.deal_id)
        if conclusion is not None:
            self._record_conclusion(conclusion[0], conclusion[2])
            if not self.all_terminal():
                self._relay_conclusion(ctx)
        if not self.all_terminal():
            self._arm_sweep(ctx)

    def all_terminal(self) -> bool:
        deal = self.descriptor
        terminal = tuple(p.value for p in TERMINAL_PHASES)
        return all(
            self.ledgers[c].contract_state(deal.contracts[c])["phase"] in terminal
            for c in deal.chains
        )

    # -- plumbing ----------------------------------------------------------------------------------------

    def _append(self, ctx: Scheduler, kind: str, record: dict, tag: str) -> None:
        sig = append_signature(self.keypair, self.descriptor.deal_id, kind, record)
        ctx.send(LOG_ACTOR, "append",
                 {"topic": self.descriptor.deal_id, "record_kind": kind,
                  "record": record, "producer": self.keypair.public_hex, "sig": sig,
                  "reply_to": self.name, "tag": tag}, sender=self.name)


def clear_deal(descriptor: DealDescriptor, ledgers: dict[str, Ledger], log: EventLog,
               svc_keypair: KeyPair, contract_inits: dict[str, tuple[str, dict]]) -> DealDescriptor:
    """Phase one: deploy one escrow contract per chain and announce the deal.

    `contract_inits` maps chain id to (contract kind, init params). The
    completed descriptor is published to the deal's topic as an info record.
    Raises EngineError(DeployFailed) on duplicate deal ids or rejected
    deployments, and EngineError(ChainUnreachable) for unknown chains.
    """
    if log.head(descriptor.deal_id) > 0:
        raise EngineError("DeployFailed", "deal id already in use")
    for chain_id in descriptor.chains:
        ledger = ledgers.get(chain_id)
        if ledger is None:
            raise EngineError("ChainUnreachable", chain_id)
        kind, init = contract_inits[chain_id]
        tx = sign_tx(svc_keypair, chain_id,
                     ledger.next_nonce(svc_keypair.address), deploy_payload(kind, init))
        receipt = ledger.submit(tx)
        if not receipt.ok:
            raise EngineError("DeployFailed", f"{chain_id}: {receipt.error_code}")
        descriptor.contracts[chain_id] = receipt.result["address"]
    record = {"deal_id": descriptor.deal_id, "descriptor": descriptor.to_json()}
    sig = append_signature(svc_keypair, descriptor.deal_id, RecordKind.INFO, record)
    log.append(descriptor.deal_id, RecordKind.INFO, record, svc_keypair.public_hex, sig)
    return descriptor


def escrow_init(descriptor: DealDescriptor, svc_keypair: KeyPair,
                log_keys: list[str], ticket: str | None = None) -> dict:
    """Shared contract init parameters for one deal."""
    init = {
        "deal_id": descriptor.deal_id,
        "party_keys": descriptor.party_keys,
        "log_keys": list(log_keys),
        "service_key": svc_keypair.public_hex,
        "specifier_account": descriptor.specifier_party.account,
    }
    if ticket is not None:
        init["ticket"] = ticket
    return init
