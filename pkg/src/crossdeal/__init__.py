"""Cross-chain deal coordination over simulated ledgers.

Assets on independent chains are exchanged atomically through escrowed
contracts, an append-only event log that arbitrates exactly one conclusion
(commit or abort) per deal, and a semi-trusted coordinator service that
relays events and assists commit-vote construction. Ships with two worked
services (a first-price cross-chain auction and a cross-chain flash loan),
a deterministic adversarial simulation harness, an HTTP gateway, and a CLI.
"""

__version__ = "0.1.0"
