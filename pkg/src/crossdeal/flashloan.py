"""Cross-chain flash loan expressed as a single deal.

The lender's funds never leave escrow unless the same atomic conclusion
repays principal plus premium. A scripted market maker stands in for the
arbitrage counterparty: it escrows a configurable payment on the loan
chain (its price for the position the borrowed funds acquire) and
optionally a second leg on another chain (the borrower's cross-chain
take). The borrower, as the deal's specifier, builds the transfer plan:

    loan chain:   principal -> maker,
                  repayment (principal + premium, capped by the maker's
                  payment) -> lender, remainder -> borrower
    action chain: maker's second leg -> borrower

When the maker's payment does not cover the repayment, the lender's
validation rejects the plan and the deal aborts with every escrow
refunded; a vanished borrower is handled by the watchdog the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chain import Ledger, call_payload, sign_tx
from .deal import DealDescriptor, Party, transfer_digest
from .engine import EngineError, PartyClient, clear_deal, escrow_init
from .eventlog import EventLog
from .harness import Scheduler
from .keys import KeyPair


@dataclass
class LoanTerms:
    loan_chain: str
    action_chain: str
    principal: int
    premium: int
    maker_payment: int  # scripted price outcome on the loan chain
    borrower_take: int  # scripted second leg on the action chain
    timeout: int

    def repayment_due(self) -> int:
        return self.principal + self.premium

    def to_json(self) -> dict:
        return {
            "loan_chain": self.loan_chain,
            "action_chain": self.action_chain,
            "principal": self.principal,
            "premium": self.premium,
            "maker_payment": self.maker_payment,
            "borrower_take": self.borrower_take,
            "timeout": self.timeout,
        }


def create_loan_deal(ledgers: dict[str, Ledger], log: EventLog, svc_keypair: KeyPair,
                     lender: Party, borrower: Party, maker: Party,
                     terms: LoanTerms) -> DealDescriptor:
    """Clearing and escrow for a loan deal (everything before the action).

    The lender must be able to fund the principal; premium zero is legal.
    The borrower is the specifier: its plan either repays or the deal dies.
    """
    if terms.premium < 0:
        raise EngineError("BadParams", "premium cannot be negative")
    loan_ledger = ledgers.get(terms.loan_chain)
    if loan_ledger is None:
        raise EngineError("ChainUnreachable", terms.loan_chain)
    if loan_ledger.balance_or_zero(lender.account) < terms.principal:
        raise EngineError("InsufficientBalance", "lender cannot fund the principal")

    chains = [terms.loan_chain]
    if terms.action_chain and terms.action_chain != terms.loan_chain:
        chains.append(terms.action_chain)
    descriptor = DealDescriptor.create(
        parties=[lender, borrower, maker], specifier=1, chains=chains,
        timeout=terms.timeout,
    )
    log_keys = [log.operator.public_hex]
    inits = {c: ("CoinEscrow", escrow_init(descriptor, svc_keypair, log_keys))
             for c in chains}
    clear_deal(descriptor, ledgers, log, svc_keypair, inits)
    return descriptor


def escrow_loan_deposits(ledgers: dict[str, Ledger], descriptor: DealDescriptor,
                         lender_keys: KeyPair, maker_keys: KeyPair,
                         terms: LoanTerms) -> None:
    """Escrow phase: principal from the lender, both scripted maker legs."""
    def deposit(keypair: KeyPair, chain_id: str, amount: int) -> None:
        if amount <= 0:
            return
        ledger = ledgers[chain_id]
        address = descriptor.contracts[chain_id]
        tx = sign_tx(keypair, chain_id, ledger.next_nonce(keypair.address),
                     call_payload(address, "deposit", {"amount": amount}))
        receipt = ledger.submit(tx)
        if not receipt.ok:
            raise EngineError("InsufficientBalance",
                              f"escrow failed on {chain_id}: {receipt.error_code}")

    deposit(lender_keys, terms.loan_chain, terms.principal)
    deposit(maker_keys, terms.loan_chain, terms.maker_payment)
    if len(descriptor.chains) > 1:
        deposit(maker_keys, terms.action_chain, terms.borrower_take)


def build_loan_plans(descriptor: DealDescriptor, lender: Party, borrower: Party,
                     maker: Party, terms: LoanTerms) -> list[tuple[str, dict]]:
    """The borrower's plan over the escrowed funds, in deal chain order."""
    repay = min(terms.repayment_due(), terms.maker_payment)
    loan_transfers = [
        {"from": lender.account, "to": maker.account, "amount": terms.principal},
    ]
    if repay > 0:
        loan_transfers.append({"from": maker.account, "to": lender.account, "amount": repay})
    profit_on_a = terms.maker_payment - repay
    if profit_on_a > 0:
        loan_transfers.append({"from": maker.account, "to": borrower.account,
                               "amount": profit_on_a})
    plans: list[tuple[str, dict]] = [(terms.loan_chain, {"transfers": loan_transfers})]
    if len(descriptor.chains) > 1:
        action_transfers = []
        if terms.borrower_take > 0:
            action_transfers.append({"from": maker.account, "to": borrower.account,
                                     "amount": terms.borrower_take})
        plans.append((terms.action_chain, {"transfers": action_transfers}))
    return plans


def make_lender_validator(lender: Party, terms: LoanTerms):
    """The lender signs only plans that repay at least principal + premium."""

    def validator(party: PartyClient, plans) -> tuple[bool, str]:
        repaid = 0
        for chain_id, plan in plans:
            if chain_id != terms.loan_chain:
                continue
            for t in plan.get("transfers", []):
                if t["to"] == lender.account:
                    repaid += int(t["amount"])
        if repaid < terms.repayment_due():
            return False, f"repays {repaid}, needs {terms.repayment_due()}"
        return True, ""

    return validator


def act_specify_loan(party: PartyClient, ctx: Scheduler, params: dict) -> None:
    """Borrower action: specify the plan on every involved chain."""
    deal = party.descriptor
    plans = params["plans"]
    digest = transfer_digest(plans)
    ctx.note(party.name, "loan_plan", {"digest": digest[:8]})
    for chain_id, plan in plans:
        address = deal.contracts[chain_id]
        party.submit_tx(ctx, chain_id,
                        call_payload(address, "specify_transfer",
                                     {"plan": plan, "deal_digest": digest}))
