"""First-price cross-chain auction built on the deal machinery.

An auctioneer sells an NFT held on a ticket chain; bidders escrow fungible
bids on their own coin chains. Exchange rates between coin-chain units and
ticket-chain units are fixed when the auction is created, and bid values
are compared as exact rationals (amount times rate), never floats.

The event log serializes everything that matters:
  - a bid counts iff its relayed record sits before the first end-auction
    record on the deal topic,
  - additive deposits raise an existing bid; a withdrawal clears it,
  - ties on normalized value break toward the earlier log offset.

Winner determination is a pure function over that log-derived bid list, so
the auctioneer computes it, and every party recomputes it independently
before signing the commit vote.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .chain import Ledger, call_payload
from .deal import DealDescriptor, Party, transfer_digest
from .engine import EngineError, PartyClient, clear_deal, escrow_init
from .eventlog import EventLog, RecordKind
from .harness import Scheduler
from .keys import KeyPair


def rate_from_json(pair) -> Fraction:
    num, den = int(pair[0]), int(pair[1])
    if num <= 0 or den <= 0:
        raise EngineError("MissingRate", "exchange rates must be positive")
    return Fraction(num, den)


def rates_from_json(obj: dict) -> dict[str, Fraction]:
    return {chain: rate_from_json(pair) for chain, pair in obj.items()}


def rates_to_json(rates: dict[str, Fraction]) -> dict:
    return {chain: [rate.numerator, rate.denominator] for chain, rate in rates.items()}


@dataclass(frozen=True)
class Bid:
    bidder: str  # account on the origin chain
    chain: str
    amount: int  # origin-chain units
    normalized: Fraction  # ticket-chain units
    log_seq: int  # offset of the record fixing this bid

    def to_row(self) -> dict:
        return {
            "bidder": self.bidder,
            "chain": self.chain,
            "amount": self.amount,
            "normalized": [self.normalized.numerator, self.normalized.denominator],
            "log_seq": self.log_seq,
        }


@dataclass
class AuctionInfo:
    """Creation-time parameters, published to the deal topic."""

    auction_id: str
    asset: str
    ticket_chain: str
    accepted_chains: list[str]
    rates: dict[str, Fraction]
    created_at: int
    ends_at: int

    def to_json(self) -> dict:
        return {
            "auction_id": self.auction_id,
            "asset": self.asset,
            "ticket_chain": self.ticket_chain,
            "accepted_chains": list(self.accepted_chains),
            "rates": rates_to_json(self.rates),
            "created_at": self.created_at,
            "ends_at": self.ends_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AuctionInfo":
        return cls(
            auction_id=obj["auction_id"],
            asset=obj["asset"],
            ticket_chain=obj["ticket_chain"],
            accepted_chains=list(obj["accepted_chains"]),
            rates=rates_from_json(obj["rates"]),
            created_at=obj["created_at"],
            ends_at=obj["ends_at"],
        )


def end_auction_offset(records) -> int | None:
    """Offset of the first end-auction record: the bid cutoff for the deal."""
    for record in records:
        if record.kind == RecordKind.END_AUCTION:
            return record.offset
    return None


def bids_from_log(records, rates: dict[str, Fraction], end_offset: int | None) -> list[Bid]:
    """Effective bids: per (chain, bidder), the latest escrow state before the cutoff.

    Duplicate relays of the same chain event are ignored (first log
    occurrence wins), additive deposits supersede by origin sequence, and a
    withdrawal clears the bid.
    """
    seen: set[tuple[str, int]] = set()
    state: dict[tuple[str, str], tuple[int, int, int]] = {}  # (total, origin_seq, log_seq)
    for record in records:
        if record.kind != RecordKind.BID:
            continue
        if end_offset is not None and record.offset >= end_offset:
            continue
        p = record.payload
        dedup_key = (p["chain"], int(p["origin_seq"]))
        if dedup_key in seen:
            continue
        seen.add(dedup_key)
        key = (p["chain"], p["bidder"])
        current = state.get(key)
        if current is None or int(p["origin_seq"]) > current[1]:
            total = 0 if p.get("withdrawn") else int(p["total"])
            state[key] = (total, int(p["origin_seq"]), record.offset)
    bids = []
    for (chain, bidder), (total, _, log_seq) in state.items():
        if total <= 0:
            continue
        rate = rates.get(chain)
        if rate is None:
            continue  # bid relayed from a chain the auction does not accept
        bids.append(Bid(bidder, chain, total, Fraction(total) * rate, log_seq))
    bids.sort(key=lambda b: b.log_seq)
    return bids


def determine_winner(bids: list[Bid]) -> Bid | None:
    """Highest normalized bid wins; ties break toward the earlier log offset."""
    best: Bid | None = None
    for bid in bids:
        if best is None or bid.normalized > best.normalized or (
            bid.normalized == best.normalized and bid.log_seq < best.log_seq
        ):
            best = bid
    return best


def build_plans(descriptor: DealDescriptor, winner: Bid,
                auctioneer_account: str) -> list[tuple[str, dict]]:
    """Per-contract transfer plans for a won auction, in deal chain order.

    The winning bid moves to the auctioneer; everything else (losing
    deposits, any excess of the winner's deposit) is refunded by the
    commit's unreferenced-deposit rule.
    """
    plans: list[tuple[str, dict]] = [(descriptor.chains[0], {"recipient": winner.bidder})]
    for chain_id in descriptor.chains[1:]:
        if chain_id == winner.chain:
            transfers = [{"from": winner.bidder, "to": auctioneer_account,
                          "amount": winner.amount}]
        else:
            transfers = []
        plans.append((chain_id, {"transfers": transfers}))
    return plans


def create_auction(ledgers: dict[str, Ledger], log: EventLog, svc_keypair: KeyPair,
                   auctioneer: Party, bidders: list[Party], *, asset: str,
                   ticket_chain: str, accepted_chains: list[str],
                   rates: dict[str, Fraction], created_at: int, ends_at: int,
                   timeout: int) -> tuple[DealDescriptor, AuctionInfo]:
    """Clearing phase for an auction deal; returns the completed descriptor.

    Sale parameters are checked up front: every accepted chain needs a
    positive rate, the auctioneer must own the asset, and the end time must
    lie in the future.
    """
    for chain_id in accepted_chains:
        if chain_id not in rates:
            raise EngineError("MissingRate", f"no exchange rate for {chain_id}")
    if ends_at <= created_at:
        raise EngineError("BadParams", "auction must end in the future")
    ticket_ledger = ledgers.get(ticket_chain)
    if ticket_ledger is None:
        raise EngineError("ChainUnreachable", ticket_chain)
    try:
        owner = ticket_ledger.nft_owner(asset)
    except Exception:
        raise EngineError("NotOwner", f"unknown asset {asset}")
    if owner != auctioneer.account:
        raise EngineError("NotOwner", f"{asset} is not held by the auctioneer")

    descriptor = DealDescriptor.create(
        parties=[auctioneer] + list(bidders), specifier=0,
        chains=[ticket_chain] + list(accepted_chains), timeout=timeout,
    )
    log_keys = [log.operator.public_hex]
    inits = {ticket_chain: ("TicketEscrow",
                            escrow_init(descriptor, svc_keypair, log_keys, ticket=asset))}
    for chain_id in accepted_chains:
        inits[chain_id] = ("CoinEscrow", escrow_init(descriptor, svc_keypair, log_keys))
    clear_deal(descriptor, ledgers, log, svc_keypair, inits)

    info = AuctionInfo(descriptor.deal_id, asset, ticket_chain,
                       list(accepted_chains), dict(rates), created_at, ends_at)
    from .eventlog import append_signature

    record = {"deal_id": descriptor.deal_id, "auction": info.to_json()}
    sig = append_signature(svc_keypair, descriptor.deal_id, RecordKind.INFO, record)
    log.append(descriptor.deal_id, RecordKind.INFO, record, svc_keypair.public_hex, sig)
    return descriptor, info


def find_auction_record(log: EventLog, deal_id: str) -> AuctionInfo | None:
    for record in log.read(deal_id):
        if record.kind == RecordKind.INFO and "auction" in record.payload:
            return AuctionInfo.from_json(record.payload["auction"])
    return None


def auction_status(log: EventLog, deal_id: str) -> str:
    conclusion = log.conclusion_for(deal_id)
    if conclusion is not None:
        return conclusion[0] + "ted" if conclusion[0] == "commit" else "aborted"
    if end_auction_offset(log.read(deal_id)) is not None:
        return "ended"
    return "open"


def auction_view(info: AuctionInfo, descriptor: DealDescriptor,
                 ledgers: dict[str, Ledger], log: EventLog, now: int) -> dict:
    """Everything a dashboard needs, recomputed from chain and log reads."""
    records = log.read(descriptor.deal_id)
    cutoff = end_auction_offset(records)
    bids = bids_from_log(records, info.rates, cutoff)
    top = determine_winner(bids)
    rows = []
    for bid in sorted(bids, key=lambda b: b.log_seq):
        row = bid.to_row()
        row["highest"] = top is not None and (bid.chain, bid.bidder) == (top.chain, top.bidder)
        rows.append(row)
    contracts = {}
    for chain_id in descriptor.chains:
        address = descriptor.contracts[chain_id]
        view = ledgers[chain_id].contract_state(address)
        contracts[chain_id] = {"address": address, "phase": view["phase"]}
    conclusion = log.conclusion_for(descriptor.deal_id)
    specifier = descriptor.specifier_party
    return {
        "auction_id": info.auction_id,
        "asset": info.asset,
        "ticket_chain": info.ticket_chain,
        "accepted_chains": info.accepted_chains,
        "rates": rates_to_json(info.rates),
        "created_at": info.created_at,
        "ends_at": info.ends_at,
        "now": now,
        "status": auction_status(log, descriptor.deal_id),
        "auctioneer": {"name": specifier.name, "account": specifier.account},
        "bids": rows,
        "contracts": contracts,
        "conclusion": None if conclusion is None else
            {"kind": conclusion[0], "offset": conclusion[2]},
        "ticket_owner": _ticket_owner(info, ledgers),
    }


def _ticket_owner(info: AuctionInfo, ledgers: dict[str, Ledger]) -> str | None:
    try:
        return ledgers[info.ticket_chain].nft_owner(info.asset)
    except Exception:
        return None


# -- party-side behavior ---------------------------------------------------------

def make_auction_validator(info: AuctionInfo, descriptor: DealDescriptor):
    """Party check before signing: the plans must equal an independent
    recomputation of the winner from the log."""

    def validator(party: PartyClient, plans) -> tuple[bool, str]:
        records = party.log.read(descriptor.deal_id)
        cutoff = end_auction_offset(records)
        if cutoff is None:
            return False, "no end-auction record on the log"
        bids = bids_from_log(records, info.rates, cutoff)
        winner = determine_winner(bids)
        if winner is None:
            return False, "no effective bids; auction should abort"
        expected = build_plans(descriptor, winner, descriptor.specifier_party.account)
        if transfer_digest(expected) != transfer_digest(list(plans)):
            return False, "plans disagree with recomputed outcome"
        return True, ""

    return validator


def act_deposit_ticket(party: PartyClient, ctx: Scheduler, params: dict) -> None:
    deal = party.descriptor
    address = deal.contracts[deal.chains[0]]
    party.submit_tx(ctx, deal.chains[0], call_payload(address, "deposit", {}))


def act_place_bid(party: PartyClient, ctx: Scheduler, params: dict) -> None:
    deal = party.descriptor
    chain_id = params["chain"]
    address = deal.contracts[chain_id]
    party.submit_tx(ctx, chain_id,
                    call_payload(address, "deposit", {"amount": int(params["amount"])}))


def act_withdraw_bid(party: PartyClient, ctx: Scheduler, params: dict) -> None:
    deal = party.descriptor
    chain_id = params["chain"]
    address = deal.contracts[chain_id]
    party.submit_tx(ctx, chain_id, call_payload(address, "withdraw_bid", {}))


def act_end_auction(party: PartyClient, ctx: Scheduler, params: dict) -> None:
    """Log the end of bidding; once logged, specify the winning plans."""
    deal = party.descriptor
    info: AuctionInfo = params["info"]
    record = {"deal_id": deal.deal_id, "auction_id": deal.deal_id, "at": ctx.now}
    party.continuations["end-auction"] = _make_specify_continuation(info)
    party.append_record(ctx, deal.deal_id, RecordKind.END_AUCTION, record,
                        tag="end-auction")


def _make_specify_continuation(info: AuctionInfo):
    def continuation(party: PartyClient, ctx: Scheduler, payload: dict) -> None:
        deal = party.descriptor
        records = party.log.read(deal.deal_id)
        cutoff = end_auction_offset(records)
        bids = bids_from_log(records, info.rates, cutoff)
        winner = determine_winner(bids)
        if winner is None:
            ctx.note(party.name, "no_bids_abort", {})
            from .deal import AbortRequest

            request = AbortRequest.signed(party.keypair, deal.deal_id, "no bids")
            ctx.send(party.svc_name, "abort_request", {"request": request.to_json()},
                     sender=party.name)
            return
        plans = build_plans(deal, winner, party.keypair.address)
        digest = transfer_digest(plans)
        ctx.note(party.name, "winner_determined",
                 {"chain": winner.chain, "amount": winner.amount, "log_seq": winner.log_seq})
        for chain_id, plan in plans:
            address = deal.contracts[chain_id]
            party.submit_tx(ctx, chain_id,
                            call_payload(address, "specify_transfer",
                                         {"plan": plan, "deal_digest": digest}))

    return continuation
