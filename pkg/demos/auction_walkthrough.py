#!/usr/bin/env python3
"""Walk through one cross-chain auction, phase by phase.

A ticket NFT lives on its own chain; two bidders hold tokens on two other
chains. Everything below runs in-process on the deterministic scheduler,
so the printout is identical on every machine.
"""

from crossdeal.eventlog import RecordKind
from crossdeal.scenarios import actor_keys, build_auction

SPEC = {
    "kind": "auction",
    "ticket_chain": "ticket-chain",
    "asset": "ticket-1",
    "coin_chains": ["coin-a", "coin-b"],
    # 1 coin-b token is worth 2 ticket-chain units; coin-a is 1:1.
    "rates": {"coin-a": [1, 1], "coin-b": [2, 1]},
    "bidders": [
        {"name": "bidder-1", "chain": "coin-a", "funds": 1000,
         "bids": [{"at": 10, "amount": 100}]},
        {"name": "bidder-2", "chain": "coin-b", "funds": 1000,
         "bids": [{"at": 14, "amount": 45}]},
    ],
    "end_at": 60,
    "timeout": 500,
}


def show_state(stack, label):
    print(f"\n--- {label} ---")
    deal = stack.descriptor
    for chain_id in deal.chains:
        view = stack.ledgers[chain_id].contract_state(deal.contracts[chain_id])
        extra = ""
        if view["kind"] == "CoinEscrow":
            extra = f" deposits={view['deposits']}"
        print(f"  {chain_id:<12} phase={view['phase']}{extra}")
    owner = stack.ledgers["ticket-chain"].nft_owner("ticket-1")
    names = {actor_keys(n).address: n for n in ("auctioneer", "bidder-1", "bidder-2")}
    print(f"  ticket-1 owner: {names.get(owner, owner[:12] + '…')}")


def main():
    print("Setting up: 3 chains, event log, deal service, 3 party clients.")
    sched, stack = build_auction(SPEC, seed=7)
    print(f"deal id: {stack.descriptor.deal_id[:16]}…")
    print("contracts:",
          {c: a[:12] + "…" for c, a in stack.descriptor.contracts.items()})
    show_state(stack, "after clearing (phase 1)")

    print("\nRunning the schedule: escrow, bids, end-auction, vote, conclusion.")
    sched.run()

    show_state(stack, "after conclusion (phase 5)")

    print("\nThe deal topic on the event log tells the whole story:")
    for record in stack.log.read(stack.descriptor.deal_id):
        kind = record.kind
        if kind == RecordKind.BID:
            p = record.payload
            print(f"  [{record.offset}] bid      {p['chain']} amount={p['amount']}"
                  f" rate={p.get('rate')}")
        elif kind == RecordKind.END_AUCTION:
            print(f"  [{record.offset}] end-auction at t={record.payload['at']}")
        elif kind == RecordKind.CONCLUSION:
            print(f"  [{record.offset}] conclusion: {record.payload['conclusion']}")
        else:
            label = "auction terms" if "auction" in record.payload else "deal descriptor"
            print(f"  [{record.offset}] info     ({label})")

    b1 = actor_keys("bidder-1").address
    auctioneer = actor_keys("auctioneer").address
    print("\nSettlement:")
    print(f"  bidder-1 paid its 100 (coin-a balance: "
          f"{stack.ledgers['coin-a'].balance(b1)})")
    print(f"  auctioneer received 100 on coin-a: "
          f"{stack.ledgers['coin-a'].balance_or_zero(auctioneer)}")
    print(f"  bidder-2 (normalized 45*2=90, lost) refunded in full: "
          f"{stack.ledgers['coin-b'].balance(actor_keys('bidder-2').address)}")


if __name__ == "__main__":
    main()
