#!/usr/bin/env python3
"""A cross-chain flash loan in three variants: profit, loss, vanished borrower.

The lender's principal sits in escrow on the loan chain; the scripted
market maker's payment decides whether the borrower's plan can repay
principal + premium. Commit and abort are decided by exactly the same
machinery as the auction: an all-party vote arbitrated by the event log.
"""

from crossdeal.scenarios import run_scenario

BASE = {
    "kind": "flashloan",
    "loan_chain": "coin-a",
    "action_chain": "coin-b",
    "principal": 100,
    "premium": 1,
    "maker_payment": 108,   # what the maker pays for the borrowed position
    "borrower_take": 5,     # the borrower's second leg on the action chain
    "lender_funds": 150,
    "settle_at": 10,
    "timeout": 300,
}


def run(label, spec):
    result = run_scenario(spec, seed=3)
    safety = result.report["lender_safety"]
    print(f"{label:<22} {result.outcome:<9} "
          f"{safety['initial']} -> {safety['final']} "
          f"({'ok' if safety['ok'] else 'VIOLATED'})")
    return result


def main():
    print("variant                outcome   lender balance")
    run("profitable", BASE)
    run("under-repays", dict(BASE, maker_payment=100))
    run("borrower crashes", dict(BASE, faults={"crashes": [["borrower", 5, None]]}))
    print()
    print("Committed runs pay the premium exactly; everything else refunds")
    print("the principal intact. The lender can never end below its start.")


if __name__ == "__main__":
    main()
