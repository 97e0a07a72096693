"""HTTP/JSON gateway: the operator surface for dashboards and terminals.

The gateway is a stateless projection layer: every response is recomputed
from chain and log reads, and every mutation is turned into a message for
the owning actor's serialized inbox. Restarting it never changes protocol
state. A dev-mode keystore holds the demo actors' keys so a browser (or
curl) can act as auctioneer or bidder without key custody; mutating
requests must carry the dev token.

Endpoints:
  GET  /health                         liveness + chain ids
  GET  /accounts                       dev keystore: name -> account address
  GET  /chains                         chain ids
  GET  /chains/{chain}/state           balance / nft / contract / events query
  GET  /auctions                       dashboard list
  POST /auctions                       create (clears the deal, escrows the ticket)
  POST /auctions/add                   register an existing auction by contract address
  GET  /auctions/{id}                  detail view (bids, highest flag, phases)
  POST /auctions/{id}/bids             place a bid
  POST /auctions/{id}/withdraw         withdraw a bid
  POST /auctions/{id}/end              end the auction (auctioneer only)
  GET  /deals/{id}/trace               log records + service journal
  GET  /log/{topic}                    raw log records from an offset
  GET  /events                         long-poll feed of new log records
"""

from __future__ import annotations

import time

from fastapi import Depends, FastAPI, Header, HTTPException

from . import auction as auction_mod
from .chain import GenesisConfig, Ledger
from .deal import DealDescriptor, Party
from .engine import ChainActor, DealService, EngineError, Journal, LogActor, PartyClient
from .eventlog import EventLog, RecordKind
from .harness import RealTimeScheduler
from .keys import KeyPair

ERROR_STATUS = {
    "MissingRate": 400,
    "BadParams": 400,
    "ChainNotAccepted": 400,
    "NotOwner": 403,
    "NotParty": 403,
    "Forbidden": 403,
    "UnknownAuction": 404,
    "UnknownChain": 404,
    "UnknownAccount": 404,
    "UnknownNft": 404,
    "UnknownContract": 404,
    "AuctionClosed": 409,
    "NotYetEnded": 409,
    "InsufficientBalance": 409,
    "NoDeposit": 409,
    "DeployFailed": 409,
    "ChainUnreachable": 502,
}


def http_error(code: str, message: str) -> HTTPException:
    return HTTPException(status_code=ERROR_STATUS.get(code, 400),
                         detail={"code": code, "message": message})


class DealRuntime:
    """Actors and bookkeeping for one live deal."""

    def __init__(self, descriptor: DealDescriptor, info: auction_mod.AuctionInfo,
                 svc: DealService, parties: dict[str, str]):
        self.descriptor = descriptor
        self.info = info
        self.svc = svc
        self.parties = parties  # party name -> actor name


class GatewayState:
    """Live stack shared by the gateway process: chains, log, actors, keys."""

    def __init__(self, ledgers: dict[str, Ledger], log: EventLog,
                 keystore: dict[str, KeyPair], svc_keys: KeyPair,
                 dev_token: str = "dev-token"):
        self.ledgers = ledgers
        self.log = log
        self.keystore = keystore
        self.svc_keys = svc_keys  # seed identity; each deal gets its own key
        self.dev_token = dev_token
        self.sched = RealTimeScheduler()
        self.deals: dict[str, DealRuntime] = {}
        self.chain_actors: dict[str, ChainActor] = {}
        self._deal_counter = 0
        self.sched.register("log", LogActor(log))
        for chain_id, ledger in ledgers.items():
            actor = ChainActor(ledger, subscribers=[])
            self.chain_actors[chain_id] = actor
            self.sched.register(actor.name, actor)

    def next_svc_keys(self) -> KeyPair:
        """One coordinator keypair per deal, so deals never share nonces."""
        self._deal_counter += 1
        return KeyPair.dev(f"svc-deal-{self._deal_counter}")

    def start(self) -> None:
        self.sched.start()

    def stop(self) -> None:
        self.sched.stop()

    # -- deal wiring -----------------------------------------------------------

    def register_auction(self, descriptor: DealDescriptor,
                         info: auction_mod.AuctionInfo,
                         svc_keys: KeyPair) -> DealRuntime:
        tag = descriptor.deal_id[:8]
        validator = auction_mod.make_auction_validator(info, descriptor)
        party_actor_names: dict[str, str] = {}
        actor_by_key: dict[str, str] = {}
        for party in descriptor.parties:
            keypair = self.keystore.get(party.name)
            if keypair is None:
                continue  # party without local keys: can watch, cannot sign
            actor_name = f"{party.name}@{tag}"
            client = PartyClient(actor_name, keypair, self.ledgers, self.log,
                                 svc_name=f"svc:{tag}")
            client.descriptor = descriptor
            client.validator = validator
            client.retry_bad_nonce = True  # shared party keys across deals
            client.actions = {
                "deposit_ticket": auction_mod.act_deposit_ticket,
                "place_bid": auction_mod.act_place_bid,
                "withdraw_bid": auction_mod.act_withdraw_bid,
                "end_auction": auction_mod.act_end_auction,
            }
            self.sched.register(actor_name, client)
            party_actor_names[party.name] = actor_name
            actor_by_key[party.pubkey] = actor_name
        svc = DealService(svc_keys, descriptor, self.ledgers, self.log,
                          actor_by_key, name=f"svc:{tag}", journal=Journal(),
                          vote_timeout=30_000, sweep_interval=2_000)
        svc.retry_bad_nonce = True
        self.sched.register(svc.name, svc)
        for chain_id in descriptor.chains:
            self.chain_actors[chain_id].subscribers.append(svc.name)
        svc.start(self.sched)
        runtime = DealRuntime(descriptor, info, svc, party_actor_names)
        self.deals[descriptor.deal_id] = runtime
        return runtime

    def find_by_ticket_contract(self, address: str) -> str | None:
        for deal_id, runtime in self.deals.items():
            ticket_chain = runtime.descriptor.chains[0]
            if runtime.descriptor.contracts.get(ticket_chain) == address:
                return deal_id
        return None

    def resolve_account(self, name_or_address: str) -> str:
        keypair = self.keystore.get(name_or_address)
        return keypair.address if keypair else name_or_address


def default_demo_state(data_dir: str | None = None,
                       dev_token: str = "dev-token") -> GatewayState:
    """Three chains, one ticket, two funded bidders: the demo topology."""
    keystore = {name: KeyPair.dev(name)
                for name in ("auctioneer", "bidder-1", "bidder-2")}
    svc_keys = KeyPair.dev("svc")
    log_keys = KeyPair.dev("log-operator")
    genesis = GenesisConfig(chains=[
        {"chain_id": "ticket-chain", "accounts": {},
         "nfts": {f"ticket-{i}": keystore["auctioneer"].address for i in (1, 2, 3)}},
        {"chain_id": "coin-a",
         "accounts": {keystore["bidder-1"].address: 10_000}},
        {"chain_id": "coin-b",
         "accounts": {keystore["bidder-2"].address: 10_000}},
    ])
    ledgers = genesis.build_ledgers()
    log = EventLog(log_keys, data_dir=data_dir)
    return GatewayState(ledgers, log, keystore, svc_keys, dev_token)


def state_from_config(config: dict, data_dir: str | None = None,
                      dev_token: str = "dev-token") -> GatewayState:
    """Build a live stack from a genesis config file.

    `parties` lists the dev-keystore actor names; `@name` references inside
    account maps and nft grants resolve to the matching dev address.
    """
    keystore = {name: KeyPair.dev(name) for name in config.get("parties", [])}

    def resolve(value: str) -> str:
        if value.startswith("@"):
            name = value[1:]
            if name not in keystore:
                keystore[name] = KeyPair.dev(name)
            return keystore[name].address
        return value

    chains = []
    for spec in config["chains"]:
        chains.append({
            "chain_id": spec["chain_id"],
            "accounts": {resolve(a): v for a, v in spec.get("accounts", {}).items()},
            "nfts": {n: resolve(o) for n, o in spec.get("nfts", {}).items()},
        })
    ledgers = GenesisConfig(chains=chains).build_ledgers()
    log = EventLog(KeyPair.dev("log-operator"), data_dir=data_dir)
    return GatewayState(ledgers, log, keystore, KeyPair.dev("svc"), dev_token)


def create_app(state: GatewayState, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="crossdeal gateway", version="0.1.0")
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    def check_token(x_dev_token: str = Header(default="")):
        if x_dev_token != state.dev_token:
            raise http_error("Forbidden", "missing or wrong dev token")

    def now_ms() -> int:
        return state.sched.wall_now()

    def runtime_or_404(auction_id: str) -> DealRuntime:
        runtime = state.deals.get(auction_id)
        if runtime is None:
            raise http_error("UnknownAuction", auction_id)
        return runtime

    def view_of(runtime: DealRuntime) -> dict:
        return auction_mod.auction_view(runtime.info, runtime.descriptor,
                                        state.ledgers, state.log, now_ms())

    # -- reads ------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"ok": True, "chains": sorted(state.ledgers), "now": now_ms()}

    @app.get("/accounts")
    def accounts():
        return {name: kp.address for name, kp in sorted(state.keystore.items())}

    @app.get("/chains")
    def chains():
        return {"chains": sorted(state.ledgers)}

    @app.get("/chains/{chain_id}/state")
    def chain_state(chain_id: str, account: str | None = None,
                    nft: str | None = None, contract: str | None = None,
                    events_since: int | None = None):
        ledger = state.ledgers.get(chain_id)
        if ledger is None:
            raise http_error("UnknownChain", chain_id)
        try:
            if account is not None:
                address = state.resolve_account(account)
                return {"chain": chain_id, "account": address,
                        "balance": ledger.balance(address)}
            if nft is not None:
                return {"chain": chain_id, "nft": nft, "owner": ledger.nft_owner(nft)}
            if contract is not None:
                return {"chain": chain_id, "contract": ledger.contract_state(contract)}
            if events_since is not None:
                return {"chain": chain_id,
                        "events": [e.to_json() for e in ledger.events_since(events_since)]}
        except Exception as err:
            code = getattr(err, "code", "BadParams")
            raise http_error(code, str(err))
        return {"chain": chain_id, "height": ledger.height,
                "accounts": ledger.accounts_view(), "nfts": ledger.nfts_view(),
                "contracts": ledger.contract_addresses(),
                "digest": ledger.state_digest()}

    @app.get("/auctions")
    def list_auctions():
        return {"auctions": [view_of(r) for r in state.deals.values()]}

    @app.get("/auctions/{auction_id}")
    def auction_detail(auction_id: str):
        return view_of(runtime_or_404(auction_id))

    @app.get("/deals/{deal_id}/trace")
    def deal_trace(deal_id: str):
        runtime = runtime_or_404(deal_id)
        return {
            "deal_id": deal_id,
            "records": [r.to_json() for r in state.log.read(deal_id)],
            "journal": runtime.svc.journal.state,
        }

    @app.get("/log/{topic}")
    def read_log(topic: str, from_offset: int = 0):
        return {"topic": topic,
                "records": [r.to_json() for r in state.log.read(topic, from_offset)]}

    @app.get("/events")
    def events(cursor: int = 0, wait: float = 0.0):
        deadline = time.monotonic() + min(wait, 25.0)
        while True:
            records = state.log.feed_since(cursor)
            if records or time.monotonic() >= deadline:
                return {"cursor": cursor + len(records),
                        "records": [r.to_json() for r in records]}
            time.sleep(0.1)

    # -- mutations ------------------------------------------------------------

    @app.post("/auctions", dependencies=[Depends(check_token)])
    def create_auction(body: dict):
        actor = body.get("actor", "auctioneer")
        keypair = state.keystore.get(actor)
        if keypair is None:
            raise http_error("UnknownAccount", actor)
        asset = body["asset"]
        ticket_chain = body.get("ticket_chain", "ticket-chain")
        accepted = list(body["accepted_chains"])
        try:
            rates = auction_mod.rates_from_json(body["rates"])
        except EngineError as err:
            raise http_error(err.code, err.reason)
        ends_at = body.get("ends_at")
        if ends_at is None:
            ends_at = now_ms() + int(body.get("duration_ms", 30_000))
        if ends_at <= now_ms():
            raise http_error("BadParams", "auction end time is in the past")
        timeout = int(body.get("timeout_ms", ends_at + 60_000))
        bidder_names = body.get("bidders") or [
            n for n in sorted(state.keystore) if n != actor]
        auctioneer = Party("auctioneer", actor, keypair.address, keypair.public_hex)
        bidders = [Party("bidder", n, state.keystore[n].address,
                         state.keystore[n].public_hex)
                   for n in bidder_names if n in state.keystore]
        svc_keys = state.next_svc_keys()
        try:
            descriptor, info = auction_mod.create_auction(
                state.ledgers, state.log, svc_keys, auctioneer, bidders,
                asset=asset, ticket_chain=ticket_chain, accepted_chains=accepted,
                rates=rates, created_at=now_ms(), ends_at=ends_at, timeout=timeout)
        except EngineError as err:
            raise http_error(err.code, err.reason)
        runtime = state.register_auction(descriptor, info, svc_keys)
        actor_name = runtime.parties[actor]
        state.sched.send(actor_name, "act", {"action": "deposit_ticket"},
                         reliable=True)
        state.sched.send(actor_name, "act",
                         {"action": "end_auction", "params": {"info": info}},
                         delay=max(1, ends_at - now_ms()), reliable=True)
        return {"auction_id": descriptor.deal_id,
                "ticket_contract": descriptor.contracts[ticket_chain],
                "contracts": descriptor.contracts,
                "ends_at": ends_at}

    @app.post("/auctions/add", dependencies=[Depends(check_token)])
    def add_existing(body: dict):
        address = body.get("ticket_contract", "")
        deal_id = state.find_by_ticket_contract(address)
        if deal_id is None:
            raise http_error("UnknownContract",
                             f"no known auction with ticket contract {address!r}")
        return view_of(state.deals[deal_id])

    @app.post("/auctions/{auction_id}/bids", dependencies=[Depends(check_token)])
    def place_bid(auction_id: str, body: dict):
        runtime = runtime_or_404(auction_id)
        actor = body["actor"]
        chain_id = body["chain"]
        amount = int(body["amount"])
        status = auction_mod.auction_status(state.log, auction_id)
        if status != "open" or now_ms() >= runtime.info.ends_at:
            raise http_error("AuctionClosed", f"auction is {status}")
        if chain_id not in runtime.info.accepted_chains:
            raise http_error("ChainNotAccepted", chain_id)
        actor_name = runtime.parties.get(actor)
        if actor_name is None:
            raise http_error("NotParty", f"{actor} is not a party to this deal")
        keypair = state.keystore[actor]
        if state.ledgers[chain_id].balance_or_zero(keypair.address) < amount:
            raise http_error("InsufficientBalance",
                             f"{actor} cannot fund {amount} on {chain_id}")
        state.sched.send(actor_name, "act",
                         {"action": "place_bid",
                          "params": {"chain": chain_id, "amount": amount}},
                         reliable=True)
        return {"accepted": True, "auction_id": auction_id,
                "chain": chain_id, "amount": amount}

    @app.post("/auctions/{auction_id}/withdraw", dependencies=[Depends(check_token)])
    def withdraw_bid(auction_id: str, body: dict):
        runtime = runtime_or_404(auction_id)
        actor = body["actor"]
        chain_id = body["chain"]
        status = auction_mod.auction_status(state.log, auction_id)
        if status != "open":
            raise http_error("AuctionClosed", f"auction is {status}")
        actor_name = runtime.parties.get(actor)
        if actor_name is None:
            raise http_error("NotParty", f"{actor} is not a party to this deal")
        address = runtime.descriptor.contracts.get(chain_id)
        if address is None:
            raise http_error("ChainNotAccepted", chain_id)
        deposits = state.ledgers[chain_id].contract_state(address)["deposits"]
        if deposits.get(state.keystore[actor].address, 0) <= 0:
            raise http_error("NoDeposit", f"{actor} has no escrowed bid on {chain_id}")
        state.sched.send(actor_name, "act",
                         {"action": "withdraw_bid", "params": {"chain": chain_id}},
                         reliable=True)
        return {"accepted": True}

    @app.post("/auctions/{auction_id}/end", dependencies=[Depends(check_token)])
    def end_auction(auction_id: str, body: dict):
        runtime = runtime_or_404(auction_id)
        actor = body.get("actor", "")
        if actor != runtime.descriptor.specifier_party.name:
            raise http_error("Forbidden", "only the auctioneer ends the auction")
        status = auction_mod.auction_status(state.log, auction_id)
        if status != "open":
            raise http_error("NotYetEnded", f"auction already {status}")
        if now_ms() < runtime.info.ends_at:
            raise http_error("NotYetEnded", "end time not reached")
        state.sched.send(runtime.parties[actor], "act",
                         {"action": "end_auction", "params": {"info": runtime.info}},
                         reliable=True)
        return {"accepted": True}

    return app
