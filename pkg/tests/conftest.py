"""Shared fixtures: deterministic keys and small prefunded ledgers."""

from __future__ import annotations

import pytest

from crossdeal.chain import Ledger
from crossdeal.keys import KeyPair

# Key generation dominates test setup cost; reuse one roster everywhere.
ROSTER = {
    name: KeyPair.dev(name)
    for name in [
        "auctioneer", "bidder-1", "bidder-2", "bidder-3",
        "lender", "borrower", "maker",
        "service", "log-op", "outsider",
    ]
}


@pytest.fixture(scope="session")
def roster() -> dict[str, KeyPair]:
    return ROSTER


@pytest.fixture()
def coin_ledger(roster) -> Ledger:
    return Ledger(
        "coin-a",
        accounts={
            roster["bidder-1"].address: 1_000,
            roster["bidder-2"].address: 1_000,
            roster["auctioneer"].address: 0,
        },
    )


@pytest.fixture()
def ticket_ledger(roster) -> Ledger:
    return Ledger(
        "ticket-chain",
        accounts={roster["auctioneer"].address: 10},
        nfts={"ticket-1": roster["auctioneer"].address},
    )
