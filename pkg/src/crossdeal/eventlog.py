"""Append-only topic log with conclusion arbitration and inclusion attestations.

One topic per deal, named by the deal id. Records are immutable once
appended and offsets are contiguous from 0. The log is the single
serialization point for deal conclusions: at most one conclusion record
(commit or abort) is ever accepted per deal, first writer wins. Escrow
contracts release assets only against an attestation signed by a log
operator, so whichever conclusion lands first is the one every chain
follows.

Wire encoding (JSON, fixed field order, hashes and signatures hex):
  record:      {"topic", "offset", "kind", "payload", "producer", "producer_sig"}
  append req:  {"op": "append", "topic", "kind", "payload", "producer", "sig"}
  read req:    {"op": "read", "topic", "from"}
  attest req:  {"op": "attest", "topic", "offset"}
  attestation: {"topic", "offset", "record_hash", "log_signature"}

The record hash covers (topic, kind, payload) so any holder of the payload
can recompute it; the attestation signature covers (topic, offset,
record_hash). Producers sign the record hash.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from enum import Enum

from . import codec, keys
from .keys import KeyPair


class RecordKind(str, Enum):
    BID = "bid"
    END_AUCTION = "end_auction"
    CONCLUSION = "conclusion"
    INFO = "info"


class ConclusionKind(str, Enum):
    COMMIT = "commit"
    ABORT = "abort"


@dataclass(frozen=True)
class LogRecord:
    topic: str
    offset: int
    kind: str
    payload: dict
    producer: str
    producer_sig: str

    def record_hash(self) -> str:
        return record_hash(self.topic, self.kind, self.payload)

    def to_json(self) -> dict:
        return {
            "topic": self.topic,
            "offset": self.offset,
            "kind": self.kind,
            "payload": self.payload,
            "producer": self.producer,
            "producer_sig": self.producer_sig,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LogRecord":
        return cls(
            topic=obj["topic"],
            offset=obj["offset"],
            kind=obj["kind"],
            payload=obj["payload"],
            producer=obj["producer"],
            producer_sig=obj["producer_sig"],
        )


@dataclass(frozen=True)
class InclusionAttestation:
    """Log-signed receipt that a specific record sits at a specific offset."""

    topic: str
    offset: int
    record_hash: str
    log_signature: str

    def to_json(self) -> dict:
        return {
            "topic": self.topic,
            "offset": self.offset,
            "record_hash": self.record_hash,
            "log_signature": self.log_signature,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "InclusionAttestation":
        return cls(obj["topic"], obj["offset"], obj["record_hash"], obj["log_signature"])


def record_hash(topic: str, kind: str, payload: dict) -> str:
    return codec.hexdigest(["log-record", topic, kind, payload])


def attestation_message(topic: str, offset: int, rec_hash: str) -> bytes:
    return codec.encode(["log-attest", topic, offset, rec_hash])


def verify_attestation(
    attestation: InclusionAttestation,
    expected_record_hash: str,
    trusted_log_keys: set[str] | frozenset[str] | list[str],
) -> bool:
    """Contract-side check: signature by a trusted log key, binding the hash."""
    if attestation.record_hash != expected_record_hash:
        return False
    message = attestation_message(
        attestation.topic, attestation.offset, attestation.record_hash
    )
    return any(
        keys.verify(key, message, attestation.log_signature)
        for key in trusted_log_keys
    )


class AppendError(Exception):
    pass


class BadSignature(AppendError):
    pass


class ConclusionExists(AppendError):
    """A conclusion for this deal is already on the log (first-wins)."""

    def __init__(self, existing_kind: str, offset: int):
        super().__init__(f"conclusion already logged: {existing_kind} at offset {offset}")
        self.existing_kind = existing_kind
        self.offset = offset


class NoSuchRecord(Exception):
    pass


class EventLog:
    """Ordered log run by a fixed operator, one signing key for attestations.

    `arbitrate_conclusions=False` disables the first-wins rule; this exists
    only so the test harness can prove its detectors notice the resulting
    atomicity violations.
    """

    def __init__(
        self,
        operator: KeyPair,
        data_dir: str | None = None,
        arbitrate_conclusions: bool = True,
    ):
        self.operator = operator
        self.arbitrate_conclusions = arbitrate_conclusions
        self.data_dir = data_dir
        self._topics: dict[str, list[LogRecord]] = {}
        self._conclusions: dict[str, tuple[str, str, int]] = {}  # deal_id -> (kind, topic, offset)
        self._feed: list[tuple[str, int]] = []  # global append order, for pollers
        self._lock = threading.RLock()
        if data_dir:
            os.makedirs(data_dir, exist_ok=True)
            self._recover()

    # -- write path ---------------------------------------------------------

    def append(self, topic: str, kind: str, payload: dict, producer: str, sig: str) -> int:
        """Append a record; returns its offset.

        Raises BadSignature on an invalid producer signature and
        ConclusionExists when a second conclusion is attempted for a deal.
        The conclusion-existence check and the append are atomic.
        """
        kind = getattr(kind, "value", kind)  # store plain strings, enum accepted
        rec_hash = record_hash(topic, kind, payload)
        if not keys.verify(producer, codec.encode(["log-append", rec_hash]), sig):
            raise BadSignature("producer signature invalid")
        with self._lock:
            if kind == RecordKind.CONCLUSION and self.arbitrate_conclusions:
                deal_id = payload["deal_id"]
                existing = self._conclusions.get(deal_id)
                if existing is not None:
                    raise ConclusionExists(existing[0], existing[2])
            records = self._topics.setdefault(topic, [])
            record = LogRecord(topic, len(records), kind, payload, producer, sig)
            records.append(record)
            self._feed.append((topic, record.offset))
            if kind == RecordKind.CONCLUSION:
                deal_id = payload["deal_id"]
                self._conclusions.setdefault(
                    deal_id, (payload["conclusion"], topic, record.offset)
                )
            self._persist(record)
            return record.offset

    # -- read path ----------------------------------------------------------

    def read(self, topic: str, from_offset: int = 0) -> list[LogRecord]:
        """All records at offset >= from_offset, in order. Unknown topic: []."""
        with self._lock:
            return list(self._topics.get(topic, ())[from_offset:])

    def head(self, topic: str) -> int:
        """Number of records in a topic."""
        with self._lock:
            return len(self._topics.get(topic, ()))

    def topics(self) -> list[str]:
        with self._lock:
            return list(self._topics.keys())

    def conclusion_for(self, deal_id: str) -> tuple[str, str, int] | None:
        """(kind, topic, offset) of the logged conclusion, or None."""
        with self._lock:
            return self._conclusions.get(deal_id)

    def feed_cursor(self) -> int:
        with self._lock:
            return len(self._feed)

    def feed_since(self, cursor: int) -> list[LogRecord]:
        """Records appended anywhere, in global append order, from a cursor."""
        with self._lock:
            return [self._topics[t][o] for t, o in self._feed[cursor:]]

    def attest(self, topic: str, offset: int) -> InclusionAttestation:
        with self._lock:
            records = self._topics.get(topic, ())
            if offset < 0 or offset >= len(records):
                raise NoSuchRecord(f"{topic}@{offset}")
            rec_hash = records[offset].record_hash()
        sig = self.operator.sign(attestation_message(topic, offset, rec_hash))
        return InclusionAttestation(topic, offset, rec_hash, sig)

    # -- persistence --------------------------------------------------------

    def _segment_path(self, topic: str) -> str:
        return os.path.join(self.data_dir, f"{topic}.log")

    def _persist(self, record: LogRecord) -> None:
        if not self.data_dir:
            return
        with open(self._segment_path(record.topic), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")

    def _recover(self) -> None:
        for name in sorted(os.listdir(self.data_dir)):
            if not name.endswith(".log"):
                continue
            with open(os.path.join(self.data_dir, name), encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = LogRecord.from_json(json.loads(line))
                    self._topics.setdefault(record.topic, []).append(record)
                    self._feed.append((record.topic, record.offset))
                    if record.kind == RecordKind.CONCLUSION:
                        self._conclusions.setdefault(
                            record.payload["deal_id"],
                            (record.payload["conclusion"], record.topic, record.offset),
                        )


def append_signature(producer: KeyPair, topic: str, kind: str, payload: dict) -> str:
    """Producer-side helper: sign the record hash for an append."""
    rec_hash = record_hash(topic, kind, payload)
    return producer.sign(codec.encode(["log-append", rec_hash]))
