"""Deterministic message scheduler with fault injection.

Every interaction between components (transaction submissions, receipts,
chain-event notifications, log appends, party messages) is a message
delivered by this scheduler under a seeded random order. Asynchrony is
modeled as unbounded-but-finite delay: a "dropped" delivery is re-scheduled
far in the future rather than lost, so every message eventually arrives
unless its target has crashed. Identical seeds give identical delivery
orders, traces, and final state digests.

Faults:
  - random per-message delays (reordering),
  - duplicate deliveries,
  - drop-and-retry (very long delays),
  - actor crashes at scheduled times, with optional restarts,
  - an equivocating party (configured by scenario builders, not here).

Messages sent with reliable=True (local timers, self-messages) bypass
fault injection and arrive exactly when scheduled.
"""

from __future__ import annotations

import heapq
import random
import threading
import time
from dataclasses import dataclass, field

from . import codec

DEFAULT_STEP_BOUND = 100_000


@dataclass(frozen=True)
class Message:
    to: str
    kind: str
    payload: dict
    sender: str = ""


@dataclass
class FaultPlan:
    """Deterministic fault decisions, drawn from the scheduler's seeded RNG."""

    delay_range: tuple[int, int] = (1, 4)
    dup_rate: float = 0.0
    drop_rate: float = 0.0
    crashes: list[tuple[str, int, int | None]] = field(default_factory=list)
    equivocator: str | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "FaultPlan":
        return cls(
            delay_range=tuple(obj.get("delay", (1, 4))),
            dup_rate=float(obj.get("dup_rate", 0.0)),
            drop_rate=float(obj.get("drop_rate", 0.0)),
            crashes=[(c[0], c[1], c[2] if len(c) > 2 else None)
                     for c in obj.get("crashes", [])],
            equivocator=obj.get("equivocator"),
        )


class Scheduler:
    """Single-threaded logical-time message loop. Also used as the actor ctx."""

    def __init__(self, seed: int, faults: FaultPlan | None = None):
        self.seed = seed
        self.rng = random.Random(seed)
        self.faults = faults or FaultPlan()
        self.now = 0
        self.steps = 0
        self._seq = 0
        self._heap: list[tuple[int, int, Message]] = []
        self._actors: dict[str, object] = {}
        self._crashed: set[str] = set()
        self.trace: list[dict] = []
        for actor, at, restart_at in self.faults.crashes:
            self.send_control(at, "__crash__", actor)
            if restart_at is not None:
                self.send_control(restart_at, "__restart__", actor)

    # -- wiring ---------------------------------------------------------------

    def register(self, name: str, actor: object) -> None:
        self._actors[name] = actor

    def is_crashed(self, name: str) -> bool:
        return name in self._crashed

    # -- sending ----------------------------------------------------------------

    def send(self, to: str, kind: str, payload: dict, sender: str = "",
             delay: int = 0, reliable: bool = False) -> None:
        base = self.now + max(0, delay)
        if reliable:
            self._push(base, Message(to, kind, payload, sender))
            return
        lo, hi = self.faults.delay_range
        when = base + self.rng.randint(lo, hi)
        if self.faults.drop_rate and self.rng.random() < self.faults.drop_rate:
            when = base + hi * 2 + self.rng.randint(hi * 2, hi * 10)
            self._note("fault_delay", {"to": to, "msg": kind, "until": when})
        self._push(when, Message(to, kind, payload, sender))
        if self.faults.dup_rate and self.rng.random() < self.faults.dup_rate:
            extra = when + self.rng.randint(1, hi * 3)
            self._push(extra, Message(to, kind, payload, sender))
            self._note("fault_duplicate", {"to": to, "msg": kind, "at": extra})

    def send_control(self, at: int, kind: str, actor: str) -> None:
        self._push(at, Message("__scheduler__", kind, {"actor": actor}))

    def _push(self, when: int, msg: Message) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (when, self._seq, msg))

    # -- tracing ------------------------------------------------------------------

    def _note(self, kind: str, detail: dict) -> None:
        entry = {"t": self.now, "kind": kind}
        for key, value in detail.items():
            entry.setdefault(key, value)
        self.trace.append(entry)

    def note(self, actor: str, kind: str, detail: dict) -> None:
        """Actors record protocol milestones here; part of the trace hash."""
        entry = {"t": self.now, "actor": actor, "kind": kind}
        for key, value in detail.items():
            entry.setdefault(key, value)
        self.trace.append(entry)

    def trace_hash(self) -> str:
        return codec.hexdigest(self.trace)

    # -- running --------------------------------------------------------------------

    def run(self, step_bound: int = DEFAULT_STEP_BOUND) -> bool:
        """Deliver messages until quiescence or the step bound.

        Returns True when the queue drained (quiesced), False on bound.
        """
        while self._heap:
            if self.steps >= step_bound:
                return False
            when, _, msg = heapq.heappop(self._heap)
            self.now = max(self.now, when)
            self.steps += 1
            if msg.to == "__scheduler__":
                self._control(msg)
                continue
            if msg.to in self._crashed:
                self._note("dropped_crashed", {"to": msg.to, "msg": msg.kind})
                continue
            actor = self._actors.get(msg.to)
            if actor is None:
                self._note("dropped_unknown", {"to": msg.to, "msg": msg.kind})
                continue
            self._note("deliver", {"to": msg.to, "msg": msg.kind, "from": msg.sender})
            actor.handle(msg, self)
        return True

    def _control(self, msg: Message) -> None:
        name = msg.payload["actor"]
        if msg.kind == "__crash__":
            self._crashed.add(name)
            self._note("crash", {"actor": name})
        elif msg.kind == "__restart__":
            self._crashed.discard(name)
            self._note("restart", {"actor": name})
            actor = self._actors.get(name)
            if actor is not None and hasattr(actor, "on_restart"):
                actor.on_restart(self)


class RealTimeScheduler(Scheduler):
    """Same components, wall-clock delivery: one tick is one millisecond.

    A background thread drains the queue as messages come due; senders on
    other threads (gateway requests) wake it through the condition variable.
    Fault injection defaults to plain fast delivery here.
    """

    def __init__(self, faults: FaultPlan | None = None):
        super().__init__(seed=0, faults=faults or FaultPlan(delay_range=(0, 1)))
        self._cv = threading.Condition()
        self._stop = False
        self._t0 = time.monotonic()
        self._thread: threading.Thread | None = None

    def wall_now(self) -> int:
        return int((time.monotonic() - self._t0) * 1000)

    def send(self, to: str, kind: str, payload: dict, sender: str = "",
             delay: int = 0, reliable: bool = False) -> None:
        with self._cv:
            self.now = self.wall_now()
            super().send(to, kind, payload, sender, delay, reliable)
            self._cv.notify()

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, name="deal-clock",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._cv:
            self._stop = True
            self._cv.notify()
        if self._thread:
            self._thread.join(timeout=2)

    def _loop(self) -> None:
        while True:
            with self._cv:
                while not self._stop:
                    self.now = self.wall_now()
                    if self._heap and self._heap[0][0] <= self.now:
                        break
                    timeout = None
                    if self._heap:
                        timeout = max(0.0, (self._heap[0][0] - self.now) / 1000.0)
                    self._cv.wait(timeout=min(timeout, 0.25) if timeout is not None else 0.25)
                if self._stop:
                    return
                when, _, msg = heapq.heappop(self._heap)
            self.now = max(self.wall_now(), when)
            self.steps += 1
            if msg.to == "__scheduler__":
                self._control(msg)
                continue
            actor = None if msg.to in self._crashed else self._actors.get(msg.to)
            if actor is not None:
                actor.handle(msg, self)
