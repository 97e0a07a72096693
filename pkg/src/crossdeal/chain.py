"""Deterministic in-process ledgers behind a uniform chain-adapter surface.

Each chain is a single-writer state machine holding fungible balances (one
native token per chain, integer minimal units), NFTs, and deployed escrow
contracts. One transaction per block, no forks, instant finality: a
submitted transaction either applies atomically (height advances by one,
events append) or rejects leaving the state digest untouched.

Addresses are 32-byte hex values: hash(public key) for accounts,
hash(chain, deployer, nonce) for contracts. Transactions carry the
sender's public key and a detached Ed25519 signature over the digest of
the canonical transaction encoding, so any component can re-verify them
bit-exactly.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from . import codec, keys
from .contracts import CONTRACT_KINDS, ContractError
from .keys import KeyPair


class ChainError(Exception):
    def __init__(self, code: str, reason: str = ""):
        super().__init__(f"{code}: {reason}" if reason else code)
        self.code = code
        self.reason = reason


@dataclass(frozen=True)
class ChainEvent:
    chain_id: str
    height: int
    contract: str
    kind: str
    payload: dict
    seq: int

    def to_json(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "height": self.height,
            "contract": self.contract,
            "kind": self.kind,
            "payload": self.payload,
            "seq": self.seq,
        }


@dataclass(frozen=True)
class Transaction:
    chain_id: str
    sender: str
    sender_pubkey: str
    nonce: int
    payload: dict  # {"type": ..., ...}
    signature: str = ""

    def signing_body(self) -> list:
        return ["tx", self.chain_id, self.sender, self.sender_pubkey, self.nonce, self.payload]

    def digest(self) -> str:
        return codec.hexdigest(self.signing_body())

    def to_json(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "sender": self.sender,
            "sender_pubkey": self.sender_pubkey,
            "nonce": self.nonce,
            "payload": self.payload,
            "signature": self.signature,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Transaction":
        return cls(
            obj["chain_id"], obj["sender"], obj["sender_pubkey"],
            obj["nonce"], obj["payload"], obj["signature"],
        )


def sign_tx(keypair: KeyPair, chain_id: str, nonce: int, payload: dict) -> Transaction:
    tx = Transaction(chain_id, keypair.address, keypair.public_hex, nonce, payload)
    sig = keypair.sign(codec.encode(tx.signing_body()))
    return Transaction(chain_id, keypair.address, keypair.public_hex, nonce, payload, sig)


def transfer_payload(to: str, amount: int) -> dict:
    return {"type": "transfer", "to": to, "amount": amount}


def transfer_nft_payload(nft_id: str, to: str) -> dict:
    return {"type": "transfer_nft", "nft_id": nft_id, "to": to}


def deploy_payload(kind: str, init: dict) -> dict:
    return {"type": "deploy", "kind": kind, "init": init}


def call_payload(address: str, method: str, args: dict) -> dict:
    return {"type": "call", "address": address, "method": method, "args": args}


@runtime_checkable
class ChainAdapter(Protocol):
    """What coordinator services need from any chain, simulated or real.

    The in-process Ledger satisfies it; an adapter for a live network would
    implement the same surface (submissions plus snapshot reads).
    """

    chain_id: str

    def submit(self, tx: "Transaction") -> "Receipt": ...
    def balance(self, account: str) -> int: ...
    def balance_or_zero(self, account: str) -> int: ...
    def nft_owner(self, nft_id: str) -> str: ...
    def contract_state(self, address: str) -> dict: ...
    def events_since(self, seq: int) -> list["ChainEvent"]: ...
    def next_nonce(self, account: str) -> int: ...


@dataclass
class Receipt:
    ok: bool
    height: int
    events: list[ChainEvent] = field(default_factory=list)
    result: dict = field(default_factory=dict)
    error_code: str = ""
    error_reason: str = ""

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "height": self.height,
            "events": [e.to_json() for e in self.events],
            "result": self.result,
            "error_code": self.error_code,
            "error_reason": self.error_reason,
        }


class _Host:
    """Mutation surface handed to contract code; undoable until the tx lands."""

    def __init__(self, ledger: "Ledger", contract_address: str):
        self._ledger = ledger
        self._contract = contract_address
        self._undo: list[tuple] = []
        self.pending_events: list[tuple[str, dict]] = []

    def transfer(self, src: str, dst: str, amount: int) -> None:
        if amount <= 0:
            raise ContractError("ZeroAmount", "transfer amount must be positive")
        accounts = self._ledger._accounts
        if accounts.get(src, 0) < amount:
            raise ContractError("InsufficientBalance", f"{src[:8]} holds {accounts.get(src, 0)}")
        accounts[src] -= amount
        accounts[dst] = accounts.get(dst, 0) + amount
        self._undo.append(("transfer", src, dst, amount))

    def move_nft(self, nft_id: str, expected_owner: str, dst: str) -> None:
        nfts = self._ledger._nfts
        owner = nfts.get(nft_id)
        if owner is None:
            raise ContractError("UnknownNft", nft_id)
        if owner != expected_owner:
            raise ContractError("NotOwner", f"{nft_id} owned by {owner[:8]}")
        nfts[nft_id] = dst
        self._undo.append(("nft", nft_id, expected_owner))

    def balance(self, account: str) -> int:
        return self._ledger._accounts.get(account, 0)

    def emit(self, kind: str, payload: dict) -> None:
        self.pending_events.append((kind, payload))

    def rollback(self) -> None:
        for entry in reversed(self._undo):
            if entry[0] == "transfer":
                _, src, dst, amount = entry
                self._ledger._accounts[dst] -= amount
                self._ledger._accounts[src] = self._ledger._accounts.get(src, 0) + amount
            else:
                _, nft_id, prev_owner = entry
                self._ledger._nfts[nft_id] = prev_owner
        self._undo.clear()
        self.pending_events.clear()


class Ledger:
    """One simulated blockchain. All mutations serialize through `submit`."""

    def __init__(self, chain_id: str, accounts: dict[str, int] | None = None,
                 nfts: dict[str, str] | None = None):
        self.chain_id = chain_id
        self.height = 0
        self._accounts: dict[str, int] = dict(accounts or {})
        self._nfts: dict[str, str] = dict(nfts or {})
        self._contracts: dict[str, object] = {}
        self._events: list[ChainEvent] = []
        self._nonces: dict[str, int] = {}
        self.genesis_supply = sum(self._accounts.values())
        self._lock = threading.RLock()

    # -- write path ---------------------------------------------------------

    def submit(self, tx: Transaction) -> Receipt:
        with self._lock:
            return self._submit_locked(tx)

    def _submit_locked(self, tx: Transaction) -> Receipt:
        try:
            self._check_envelope(tx)
        except ChainError as err:
            return self._reject(err.code, err.reason)
        kind = tx.payload.get("type")
        try:
            if kind == "transfer":
                events, result = self._apply_transfer(tx)
            elif kind == "transfer_nft":
                events, result = self._apply_transfer_nft(tx)
            elif kind == "deploy":
                events, result = self._apply_deploy(tx)
            elif kind == "call":
                events, result = self._apply_call(tx)
            else:
                raise ChainError("BadParams", f"unknown payload type {kind!r}")
        except ChainError as err:
            return self._reject(err.code, err.reason)
        self._nonces[tx.sender] = tx.nonce
        self.height += 1
        emitted = []
        for event_kind, payload, contract in events:
            event = ChainEvent(
                self.chain_id, self.height, contract, event_kind, payload, len(self._events)
            )
            self._events.append(event)
            emitted.append(event)
        return Receipt(True, self.height, emitted, result)

    def _check_envelope(self, tx: Transaction) -> None:
        if tx.chain_id != self.chain_id:
            raise ChainError("BadParams", f"tx for {tx.chain_id}, this is {self.chain_id}")
        if keys.address_of(tx.sender_pubkey) != tx.sender:
            raise ChainError("BadSignature", "sender address does not match public key")
        if not keys.verify(tx.sender_pubkey, codec.encode(tx.signing_body()), tx.signature):
            raise ChainError("BadSignature", "transaction signature invalid")
        expected = self._nonces.get(tx.sender, 0) + 1
        if tx.nonce != expected:
            raise ChainError("BadNonce", f"expected {expected}, got {tx.nonce}")

    def _apply_transfer(self, tx: Transaction):
        amount = int(tx.payload["amount"])
        if amount <= 0:
            raise ChainError("ZeroAmount", "transfer amount must be positive")
        if self._accounts.get(tx.sender, 0) < amount:
            raise ChainError(
                "InsufficientBalance",
                f"balance {self._accounts.get(tx.sender, 0)}, needs {amount}",
            )
        self._accounts[tx.sender] -= amount
        to = tx.payload["to"]
        self._accounts[to] = self._accounts.get(to, 0) + amount
        return [], {"to": to, "amount": amount}

    def _apply_transfer_nft(self, tx: Transaction):
        nft_id = tx.payload["nft_id"]
        owner = self._nfts.get(nft_id)
        if owner is None:
            raise ChainError("UnknownNft", nft_id)
        if owner != tx.sender:
            raise ChainError("NotOwner", f"{nft_id} not owned by sender")
        self._nfts[nft_id] = tx.payload["to"]
        return [], {"nft_id": nft_id, "to": tx.payload["to"]}

    def _apply_deploy(self, tx: Transaction):
        kind = tx.payload["kind"]
        contract_cls = CONTRACT_KINDS.get(kind)
        if contract_cls is None:
            raise ChainError("BadParams", f"unknown contract kind {kind!r}")
        address = codec.hexdigest(["contract-addr", self.chain_id, tx.sender, tx.nonce])
        try:
            contract = contract_cls(address, tx.payload["init"])
        except ContractError as err:
            raise ChainError(err.code, err.reason)
        self._contracts[address] = contract
        return [], {"address": address}

    def _apply_call(self, tx: Transaction):
        address = tx.payload["address"]
        contract = self._contracts.get(address)
        if contract is None:
            raise ChainError("UnknownContract", address)
        host = _Host(self, address)
        snapshot = copy.deepcopy(contract.__dict__)
        try:
            result = contract.call(tx.payload["method"], host, tx.sender, tx.payload["args"])
        except ContractError as err:
            host.rollback()
            contract.__dict__.clear()
            contract.__dict__.update(snapshot)
            raise ChainError(err.code, err.reason)
        events = [(kind, payload, address) for kind, payload in host.pending_events]
        return events, result or {}

    def _reject(self, code: str, reason: str) -> Receipt:
        return Receipt(False, self.height, [], {}, code, reason)

    # -- read path (concurrent snapshots) ------------------------------------

    def balance(self, account: str) -> int:
        with self._lock:
            if account not in self._accounts:
                raise ChainError("UnknownAccount", account)
            return self._accounts[account]

    def balance_or_zero(self, account: str) -> int:
        with self._lock:
            return self._accounts.get(account, 0)

    def nft_owner(self, nft_id: str) -> str:
        with self._lock:
            owner = self._nfts.get(nft_id)
            if owner is None:
                raise ChainError("UnknownNft", nft_id)
            return owner

    def contract_state(self, address: str) -> dict:
        with self._lock:
            contract = self._contracts.get(address)
            if contract is None:
                raise ChainError("UnknownContract", address)
            return contract.state_view()

    def contract_addresses(self) -> list[str]:
        with self._lock:
            return list(self._contracts.keys())

    def events_since(self, seq: int) -> list[ChainEvent]:
        with self._lock:
            return self._events[seq:]

    def next_nonce(self, account: str) -> int:
        with self._lock:
            return self._nonces.get(account, 0) + 1

    def accounts_view(self) -> dict[str, int]:
        with self._lock:
            return dict(self._accounts)

    def nfts_view(self) -> dict[str, str]:
        with self._lock:
            return dict(self._nfts)

    # -- integrity ------------------------------------------------------------

    def state_digest(self) -> str:
        with self._lock:
            views = {
                addr: self._contracts[addr].state_view() for addr in sorted(self._contracts)
            }
            return codec.hexdigest(
                [
                    "ledger-state",
                    self.chain_id,
                    self.height,
                    self._accounts,
                    self._nfts,
                    views,
                    self._nonces,
                    [e.to_json() for e in self._events],
                ]
            )

    def total_supply(self) -> int:
        """Sum over all accounts, contract holdings included."""
        with self._lock:
            return sum(self._accounts.values())

    def state_export(self) -> dict:
        with self._lock:
            return {
                "chain_id": self.chain_id,
                "height": self.height,
                "accounts": dict(self._accounts),
                "nfts": dict(self._nfts),
                "contracts": {
                    addr: self._contracts[addr].state_view()
                    for addr in sorted(self._contracts)
                },
                "nonces": dict(self._nonces),
                "events": [e.to_json() for e in self._events],
                "genesis_supply": self.genesis_supply,
                "digest": self.state_digest(),
            }


@dataclass
class GenesisConfig:
    """Startup state: chains with balances and NFT grants, plus trusted keys."""

    chains: list[dict]  # {"chain_id", "accounts": {...}, "nfts": {...}}
    log_operators: list[str] = field(default_factory=list)
    parties: dict[str, str] = field(default_factory=dict)  # name -> pubkey

    def build_ledgers(self) -> dict[str, Ledger]:
        ledgers: dict[str, Ledger] = {}
        for spec in self.chains:
            chain_id = spec["chain_id"]
            if chain_id in ledgers:
                raise ChainError("BadParams", f"duplicate chain id {chain_id!r}")
            ledgers[chain_id] = Ledger(
                chain_id, spec.get("accounts", {}), spec.get("nfts", {})
            )
        return ledgers

    def to_json(self) -> dict:
        return {
            "chains": self.chains,
            "log_operators": self.log_operators,
            "parties": self.parties,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GenesisConfig":
        return cls(
            chains=list(obj["chains"]),
            log_operators=list(obj.get("log_operators", [])),
            parties=dict(obj.get("parties", {})),
        )
