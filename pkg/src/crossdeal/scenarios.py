"""Scenario scripts: build, run, and judge complete multi-chain executions.

A scenario (JSON-able dict) names the chains, the cast of parties with
their scripted actions at logical times, and the fault plan. Running one
builds fresh ledgers, an event log, a deal service, and party actors,
schedules the script, drives the scheduler to quiescence or a step bound,
and evaluates the registered invariants:

  atomicity            no deal ends with contracts both Committed and Aborted
  conservation         per-chain token sums equal the genesis supply
  nft uniqueness       every NFT lives on exactly one chain with one owner
  conclusion-follows-log  terminal contract phases match the logged conclusion
  terminality          every contract reached a terminal phase
  lender safety        (loan runs) lender never ends below its start

`explore` sweeps seeds and aggregates; `mutations` can disable the log's
conclusion arbitration to prove the detectors actually fire.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import auction as auction_mod
from . import flashloan as loan_mod
from .chain import Ledger
from .deal import Party
from .engine import ChainActor, DealService, Journal, LogActor, PartyClient
from .eventlog import EventLog
from .harness import DEFAULT_STEP_BOUND, FaultPlan, Scheduler
from .keys import KeyPair

TERMINAL = ("Committed", "Aborted")

_KEY_CACHE: dict[str, KeyPair] = {}


def actor_keys(name: str) -> KeyPair:
    kp = _KEY_CACHE.get(name)
    if kp is None:
        kp = KeyPair.dev(name)
        _KEY_CACHE[name] = kp
    return kp


@dataclass
class Stack:
    """Everything a running scenario touches; checks read it afterwards."""

    ledgers: dict[str, Ledger]
    log: EventLog
    svc: DealService
    parties: dict[str, PartyClient]
    descriptor: object
    kind: str
    meta: dict = field(default_factory=dict)
    initial_balances: dict[str, dict[str, int]] = field(default_factory=dict)


@dataclass
class ScenarioResult:
    seed: int
    quiesced: bool
    steps: int
    trace_hash: str
    digests: dict[str, str]
    report: dict
    outcome: str  # committed | aborted | mixed | stuck
    phases: dict[str, str]
    trace: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "quiesced": self.quiesced,
            "steps": self.steps,
            "trace_hash": self.trace_hash,
            "digests": self.digests,
            "report": self.report,
            "outcome": self.outcome,
            "phases": self.phases,
        }


class ScriptError(Exception):
    pass


def _sample_faults(spec: dict, seed: int) -> FaultPlan:
    """Static faults from the script plus seed-drawn random faults."""
    plan = FaultPlan.from_json(spec.get("faults", {}))
    randomized = spec.get("random_faults")
    if randomized:
        rng = random.Random(seed * 1_000_003 + 17)
        lo, hi = randomized.get("window", (5, 100))
        crashes = list(plan.crashes)
        rate = randomized.get("party_crash_rate", 0.0)
        for name in randomized.get("crashable", []):
            if rng.random() < rate:
                crashes.append((name, rng.randint(lo, hi), None))
        svc_rate = randomized.get("svc_crash_rate", 0.0)
        if svc_rate and rng.random() < svc_rate:
            at = rng.randint(lo, hi)
            crashes.append(("svc", at, at + rng.randint(20, 80)))
        plan.crashes = crashes
    return plan


# -- auction scenarios ---------------------------------------------------------


def build_auction(spec: dict, seed: int, mutations: dict | None = None) -> tuple[Scheduler, Stack]:
    mutations = mutations or {}
    ticket_chain = spec.get("ticket_chain", "ticket-chain")
    coin_chains = list(spec.get("coin_chains", ["coin-a", "coin-b"]))
    asset = spec.get("asset", "ticket-1")
    rates = auction_mod.rates_from_json(
        spec.get("rates", {c: [1, 1] for c in coin_chains}))
    end_at = int(spec.get("end_at", 60))
    timeout = int(spec.get("timeout", end_at + 400))

    auctioneer_name = spec.get("auctioneer", {}).get("name", "auctioneer")
    bidder_specs = spec.get("bidders", [])
    if not bidder_specs:
        raise ScriptError("auction scenario needs at least one bidder entry")

    cast = {auctioneer_name: actor_keys(auctioneer_name)}
    for b in bidder_specs:
        cast[b["name"]] = actor_keys(b["name"])
    svc_keys = actor_keys("svc")
    log_keys = actor_keys("log-operator")

    accounts: dict[str, dict[str, int]] = {c: {} for c in coin_chains}
    for b in bidder_specs:
        funds = b.get("funds", 1_000)
        if isinstance(funds, int):
            funds = {b.get("chain", coin_chains[0]): funds}
        for chain_id, amount in funds.items():
            accounts[chain_id][cast[b["name"]].address] = amount
    ledgers = {ticket_chain: Ledger(ticket_chain,
                                    nfts={asset: cast[auctioneer_name].address})}
    for chain_id in coin_chains:
        ledgers[chain_id] = Ledger(chain_id, accounts=accounts[chain_id])
    initial = {c: ledgers[c].accounts_view() for c in ledgers}  # genesis holdings

    log = EventLog(log_keys,
                   arbitrate_conclusions=mutations.get("log_arbitration", True))

    auctioneer_party = Party("auctioneer", auctioneer_name,
                             cast[auctioneer_name].address,
                             cast[auctioneer_name].public_hex)
    bidder_parties = [Party("bidder", b["name"], cast[b["name"]].address,
                            cast[b["name"]].public_hex) for b in bidder_specs]
    descriptor, info = auction_mod.create_auction(
        ledgers, log, svc_keys, auctioneer_party, bidder_parties,
        asset=asset, ticket_chain=ticket_chain, accepted_chains=coin_chains,
        rates=rates, created_at=0, ends_at=end_at, timeout=timeout,
    )

    faults = _sample_faults(
        {**spec, "random_faults": _with_crashable(spec, [b["name"] for b in bidder_specs])},
        seed,
    )
    sched = Scheduler(seed, faults)

    parties: dict[str, PartyClient] = {}
    validator = auction_mod.make_auction_validator(info, descriptor)
    for name, keypair in cast.items():
        client = PartyClient(name, keypair, ledgers, log)
        client.descriptor = descriptor
        client.validator = validator
        client.actions = {
            "deposit_ticket": auction_mod.act_deposit_ticket,
            "place_bid": auction_mod.act_place_bid,
            "withdraw_bid": auction_mod.act_withdraw_bid,
            "end_auction": auction_mod.act_end_auction,
        }
        client.equivocate = faults.equivocator == name
        client.reject_votes = name in spec.get("rejectors", [])
        parties[name] = client
        sched.register(name, client)

    svc = DealService(svc_keys, descriptor, ledgers, log,
                      {p.pubkey: p.name for p in descriptor.parties},
                      journal=Journal(spec.get("journal_path")))
    sched.register("svc", svc)
    sched.register("log", LogActor(log))
    for chain_id, ledger in ledgers.items():
        sched.register(f"chain:{chain_id}", ChainActor(ledger, subscribers=["svc"]))

    # Script: escrow the ticket, bid, optionally withdraw, end the auction.
    sched.send(auctioneer_name, "act", {"action": "deposit_ticket"}, delay=1, reliable=True)
    for b in bidder_specs:
        for bid in b.get("bids", []):
            sched.send(b["name"], "act",
                       {"action": "place_bid",
                        "params": {"chain": bid.get("chain", b.get("chain", coin_chains[0])),
                                   "amount": bid["amount"]}},
                       delay=int(bid["at"]), reliable=True)
    for w in spec.get("withdrawals", []):
        sched.send(w["name"], "act",
                   {"action": "withdraw_bid", "params": {"chain": w["chain"]}},
                   delay=int(w["at"]), reliable=True)
    sched.send(auctioneer_name, "act",
               {"action": "end_auction", "params": {"info": info}},
               delay=end_at, reliable=True)
    svc.start(sched)

    stack = Stack(ledgers, log, svc, parties, descriptor, "auction",
                  meta={"info": info, "rates": rates,
                        "auctioneer": auctioneer_name,
                        "bidders": [b["name"] for b in bidder_specs]},
                  initial_balances=initial)
    return sched, stack


def _with_crashable(spec: dict, bidder_names: list[str]) -> dict | None:
    randomized = spec.get("random_faults")
    if not randomized:
        return None
    merged = dict(randomized)
    merged.setdefault("crashable", bidder_names)
    return merged


# -- flash-loan scenarios ----------------------------------------------------------


def build_flashloan(spec: dict, seed: int, mutations: dict | None = None) -> tuple[Scheduler, Stack]:
    mutations = mutations or {}
    terms = loan_mod.LoanTerms(
        loan_chain=spec.get("loan_chain", "coin-a"),
        action_chain=spec.get("action_chain", "coin-b"),
        principal=int(spec.get("principal", 100)),
        premium=int(spec.get("premium", 1)),
        maker_payment=int(spec.get("maker_payment", 110)),
        borrower_take=int(spec.get("borrower_take", 0)),
        timeout=int(spec.get("timeout", 300)),
    )
    settle_at = int(spec.get("settle_at", 10))

    cast = {name: actor_keys(name) for name in ("lender", "borrower", "maker")}
    svc_keys = actor_keys("svc")
    log_keys = actor_keys("log-operator")

    lender_funds = int(spec.get("lender_funds", terms.principal))
    ledgers = {
        terms.loan_chain: Ledger(terms.loan_chain, accounts={
            cast["lender"].address: lender_funds,
            cast["maker"].address: max(terms.maker_payment, 0),
        }),
    }
    if terms.action_chain and terms.action_chain != terms.loan_chain:
        ledgers[terms.action_chain] = Ledger(terms.action_chain, accounts={
            cast["maker"].address: max(terms.borrower_take, 0),
        })
    log = EventLog(log_keys,
                   arbitrate_conclusions=mutations.get("log_arbitration", True))

    lender = Party("lender", "lender", cast["lender"].address, cast["lender"].public_hex)
    borrower = Party("borrower", "borrower", cast["borrower"].address,
                     cast["borrower"].public_hex)
    maker = Party("maker", "maker", cast["maker"].address, cast["maker"].public_hex)
    initial = {c: ledgers[c].accounts_view() for c in ledgers}  # pre-escrow holdings
    descriptor = loan_mod.create_loan_deal(ledgers, log, svc_keys,
                                           lender, borrower, maker, terms)
    loan_mod.escrow_loan_deposits(ledgers, descriptor, cast["lender"], cast["maker"], terms)

    faults = _sample_faults(
        {**spec, "random_faults": _with_crashable(spec, ["borrower"])}, seed)
    sched = Scheduler(seed, faults)

    parties: dict[str, PartyClient] = {}
    for name, keypair in cast.items():
        client = PartyClient(name, keypair, ledgers, log)
        client.descriptor = descriptor
        client.actions = {"specify_loan": loan_mod.act_specify_loan}
        client.equivocate = faults.equivocator == name
        parties[name] = client
        sched.register(name, client)
    parties["lender"].validator = loan_mod.make_lender_validator(lender, terms)

    svc = DealService(svc_keys, descriptor, ledgers, log,
                      {p.pubkey: p.name for p in descriptor.parties},
                      journal=Journal(spec.get("journal_path")))
    sched.register("svc", svc)
    sched.register("log", LogActor(log))
    for chain_id, ledger in ledgers.items():
        sched.register(f"chain:{chain_id}", ChainActor(ledger, subscribers=["svc"]))

    plans = loan_mod.build_loan_plans(descriptor, lender, borrower, maker, terms)
    sched.send("borrower", "act", {"action": "specify_loan", "params": {"plans": plans}},
               delay=settle_at, reliable=True)
    svc.start(sched)

    stack = Stack(ledgers, log, svc, parties, descriptor, "flashloan",
                  meta={"terms": terms, "lender": lender, "borrower": borrower,
                        "maker": maker, "lender_funds": lender_funds},
                  initial_balances=initial)
    return sched, stack


# -- running and judging ----------------------------------------------------------------


BUILDERS = {"auction": build_auction, "flashloan": build_flashloan}


def run_scenario(spec: dict, seed: int, step_bound: int = DEFAULT_STEP_BOUND,
                 mutations: dict | None = None, keep_trace: bool = False) -> ScenarioResult:
    builder = BUILDERS.get(spec.get("kind", "auction"))
    if builder is None:
        raise ScriptError(f"unknown scenario kind {spec.get('kind')!r}")
    sched, stack = builder(spec, seed, mutations)
    quiesced = sched.run(step_bound)
    report = evaluate_invariants(stack, quiesced)
    phases = contract_phases(stack)
    result = ScenarioResult(
        seed=seed,
        quiesced=quiesced,
        steps=sched.steps,
        trace_hash=sched.trace_hash(),
        digests={c: stack.ledgers[c].state_digest() for c in sorted(stack.ledgers)},
        report=report,
        outcome=outcome_of(phases),
        phases=phases,
        trace=sched.trace if keep_trace else [],
    )
    return result


def contract_phases(stack: Stack) -> dict[str, str]:
    deal = stack.descriptor
    return {
        chain_id: stack.ledgers[chain_id].contract_state(deal.contracts[chain_id])["phase"]
        for chain_id in deal.chains
    }


def outcome_of(phases: dict[str, str]) -> str:
    values = set(phases.values())
    if values == {"Committed"}:
        return "committed"
    if values == {"Aborted"}:
        return "aborted"
    if "Committed" in values and "Aborted" in values:
        return "mixed"
    return "stuck"


def evaluate_invariants(stack: Stack, quiesced: bool) -> dict:
    report: dict = {}
    phases = contract_phases(stack)

    committed = [c for c, p in phases.items() if p == "Committed"]
    aborted = [c for c, p in phases.items() if p == "Aborted"]
    report["atomicity"] = {
        "ok": not (committed and aborted),
        "committed": committed,
        "aborted": aborted,
    }

    conservation = []
    for chain_id, ledger in stack.ledgers.items():
        total = ledger.total_supply()
        if total != ledger.genesis_supply:
            conservation.append({"chain": chain_id, "expected": ledger.genesis_supply,
                                 "actual": total})
    report["conservation"] = {"ok": not conservation, "violations": conservation}

    owners: dict[str, list[str]] = {}
    for chain_id, ledger in stack.ledgers.items():
        for nft_id, owner in ledger.nfts_view().items():
            owners.setdefault(nft_id, []).append(f"{chain_id}:{owner}")
    nft_bad = {n: o for n, o in owners.items() if len(o) != 1 or not o[0].split(":", 1)[1]}
    report["nft_unique"] = {"ok": not nft_bad, "violations": nft_bad}

    conclusion = stack.log.conclusion_for(stack.descriptor.deal_id)
    follows = []
    for chain_id, phase in phases.items():
        if phase == "Committed" and (conclusion is None or conclusion[0] != "commit"):
            follows.append({"chain": chain_id, "phase": phase, "logged": conclusion})
        if phase == "Aborted" and (conclusion is None or conclusion[0] != "abort"):
            follows.append({"chain": chain_id, "phase": phase, "logged": conclusion})
    report["conclusion_follows_log"] = {"ok": not follows, "violations": follows}

    report["all_terminal"] = all(p in TERMINAL for p in phases.values())
    report["quiesced"] = quiesced

    if stack.kind == "flashloan":
        terms: loan_mod.LoanTerms = stack.meta["terms"]
        lender = stack.meta["lender"]
        start = stack.initial_balances[terms.loan_chain].get(lender.account, 0)
        final = stack.ledgers[terms.loan_chain].balance_or_zero(lender.account)
        outcome = outcome_of(phases)
        expected = start + terms.premium if outcome == "committed" else start
        report["lender_safety"] = {
            "ok": final >= start and (outcome != "committed" or final == expected)
                  and (outcome != "aborted" or final == start),
            "initial": start,
            "final": final,
            "outcome": outcome,
        }

    report["ok"] = all(
        section.get("ok", True) if isinstance(section, dict) else bool(section)
        for key, section in report.items()
        if key in ("atomicity", "conservation", "nft_unique",
                   "conclusion_follows_log", "lender_safety")
    )
    return report


@dataclass
class ExploreReport:
    runs: int
    violations: list[dict]
    outcomes: dict[str, int]
    stuck_seeds: list[int]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "runs": self.runs,
            "violations": self.violations,
            "outcomes": self.outcomes,
            "stuck_seeds": self.stuck_seeds,
            "ok": self.ok,
        }


def explore(spec: dict, seeds, step_bound: int = DEFAULT_STEP_BOUND,
            mutations: dict | None = None, stop_on_violation: bool = False) -> ExploreReport:
    """Run one scenario across many seeds and aggregate what the checks saw."""
    violations: list[dict] = []
    outcomes: dict[str, int] = {}
    stuck: list[int] = []
    runs = 0
    for seed in seeds:
        result = run_scenario(spec, seed, step_bound, mutations)
        runs += 1
        outcomes[result.outcome] = outcomes.get(result.outcome, 0) + 1
        if not result.report["ok"]:
            bad = [k for k in ("atomicity", "conservation", "nft_unique",
                               "conclusion_follows_log", "lender_safety")
                   if isinstance(result.report.get(k), dict)
                   and not result.report[k].get("ok", True)]
            violations.append({"seed": seed, "failed": bad, "outcome": result.outcome})
            if stop_on_violation:
                break
        if not result.report["all_terminal"]:
            stuck.append(seed)
    return ExploreReport(runs, violations, outcomes, stuck)
