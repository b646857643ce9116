"""Adversary-controlled network: routing, party runtimes and the transcript."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..auth import SignatureScheme
from ..bb84 import (INITIATOR, RESPONDER, SIG, Bb84Config, Bb84Session, HonestEndpoint,
                    Stage, generators, init_session)
from ..model import STATIC, World
from ..quantum import EveRecord, QubitFrame
from ..wire import BASES, EPS, START, ClassicalMessage


@dataclass
class QuantumSend:
    receiver: str
    frame: QubitFrame
    handle: int


@dataclass
class TranscriptEvent:
    ordinal: int
    channel: str  # "c" | "q" | "query"
    tag: str
    sid_a: str = ""
    sid_b: str = ""
    payload: str = ""  # hex
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ordinal": self.ordinal, "channel": self.channel, "tag": self.tag,
                "sid_a": self.sid_a, "sid_b": self.sid_b, "payload": self.payload,
                **self.meta}


@dataclass
class Transcript:
    """Everything the online adversary saw, in event order."""

    events: list[TranscriptEvent] = field(default_factory=list)
    messages: list[ClassicalMessage] = field(default_factory=list)
    eve_records: list[EveRecord] = field(default_factory=list)

    def add(self, event: TranscriptEvent) -> None:
        if self.events and event.ordinal <= self.events[-1].ordinal:
            raise ValueError("transcript ordinals must increase")
        self.events.append(event)

    def to_lines(self, prefix: dict | None = None) -> list[str]:
        return [json.dumps({**(prefix or {}), **e.to_json()}, sort_keys=True)
                for e in self.events]

    def session_messages(self, sid_a: str) -> dict[str, ClassicalMessage]:
        """First sent message of each tag belonging to the run opened by ``sid_a``."""
        out: dict[str, ClassicalMessage] = {}
        for msg in self.messages:
            if msg.sid_a == sid_a and msg.tag not in out:
                out[msg.tag] = msg
        return out


class PartyRuntime:
    def __init__(self, endpoint, config: Bb84Config):
        self.endpoint = endpoint
        self.config = config
        self.sessions: dict[str, Bb84Session] = {}
        self.armed: list[Bb84Session] = []
        self.dropped = 0

    def open(self, peer: str):
        session, msgs, frame = init_session(self.endpoint, INITIATOR, self.config, peer)
        self.sessions[str(session.sid)] = session
        return session, msgs, frame

    def handle(self, msg: ClassicalMessage) -> list[ClassicalMessage]:
        if msg.tag == START:
            if msg.fields != (("role", RESPONDER), ("initiator", msg.sender)):
                self.dropped += 1
                return []
            session, out, _ = init_session(self.endpoint, RESPONDER, self.config,
                                           msg.sender, start=msg)
            self.sessions[str(session.sid)] = session
            self.armed.append(session)
            return out
        own = msg.sid_a if msg.tag in (BASES, EPS) else msg.sid_b
        session = self.sessions.get(own)
        if session is None:
            self.dropped += 1
            return []
        return session.process(msg)

    def handle_frame(self, frame: QubitFrame) -> list[ClassicalMessage]:
        for session in reversed(self.armed):
            if session.stage == Stage.ARMED:
                return session.on_qubits(frame)
        self.dropped += 1
        return []


class Network:
    """The channels between parties, under full control of the adversary.

    Strategies call :meth:`initiate`, :meth:`deliver` and
    :meth:`deliver_frame`; every hand-off is stamped with the world clock and
    appended to the transcript. The e- and r-channels never pass through here.
    """

    def __init__(self, world: World, scheme: SignatureScheme, config: Bb84Config):
        self.world = world
        self.scheme = scheme
        self.config = config
        self.world.generators.update(generators(config))
        self.transcript = Transcript()
        self.runtimes: dict[str, PartyRuntime] = {}
        self.keypairs = {}
        self._handles = 0
        world.listeners.append(self._on_world_event)

    def _on_world_event(self, ordinal: int, kind: str, info: dict) -> None:
        if kind == "query":
            self.transcript.add(TranscriptEvent(ordinal, "query", info["kind"],
                                                payload=info["target"].encode().hex(),
                                                meta={"party": info["party"]}))

    def add_party(self, pid: str, honest: bool = True) -> None:
        self.world.register_party(pid, honest)
        if not honest:
            return
        keypair = self.scheme.keygen(pid, self.world.rngs[pid])
        self.world.add_pair(pid, SIG, keypair.signing_key, STATIC, public_part=keypair.verify_key)
        self.world.public_keys[pid] = keypair.verify_key
        self.keypairs[pid] = keypair
        self.runtimes[pid] = PartyRuntime(HonestEndpoint(self.world, self.scheme, pid, keypair),
                                          self.config)

    def log_message(self, msg: ClassicalMessage, direction: str) -> None:
        if direction == "sent":
            self.transcript.messages.append(msg)
        self.transcript.add(TranscriptEvent(
            self.world.tick(), "c", msg.tag, msg.sid_a, msg.sid_b, msg.payload_bytes().hex(),
            {"dir": direction, "sender": msg.sender, "receiver": msg.receiver,
             "signature": msg.signature}))

    def log_frame(self, receiver: str, frame: QubitFrame, direction: str,
                  handle: int | None = None) -> int:
        if handle is None:
            self._handles += 1
            handle = self._handles
        self.transcript.add(TranscriptEvent(
            self.world.tick(), "q", "frame", payload=f"{handle:08x}",
            meta={"dir": direction, "receiver": receiver, "length": len(frame)}))
        return handle

    def log_eve(self, record: EveRecord, handle: int) -> None:
        self.transcript.eve_records.append(record)
        body = json.dumps(record.to_json(), separators=(",", ":")).encode()
        self.transcript.add(TranscriptEvent(self.world.tick(), "q", "eve-record",
                                            payload=body.hex(), meta={"handle": handle}))

    def emit(self, msgs) -> list[ClassicalMessage]:
        for msg in msgs:
            self.log_message(msg, "sent")
        return list(msgs)

    def initiate(self, initiator: str, responder: str):
        """SendC(start, initiator, responder) to ``initiator``; returns its outputs."""
        self.world.party(responder)
        session, msgs, frame = self.runtimes[initiator].open(responder)
        out = self.emit(msgs)
        handle = self.log_frame(responder, frame, "sent")
        return session, out + [QuantumSend(responder, frame, handle)]

    def deliver(self, msg: ClassicalMessage) -> list[ClassicalMessage]:
        self.log_message(msg, "delivered")
        runtime = self.runtimes.get(msg.receiver)
        if runtime is None:
            return []
        return self.emit(runtime.handle(msg))

    def deliver_frame(self, receiver: str, frame: QubitFrame, handle: int | None = None):
        handle = self.log_frame(receiver, frame, "delivered", handle)
        runtime = self.runtimes.get(receiver)
        if runtime is None:
            return []
        return self.emit(runtime.handle_frame(frame))

    def expire(self) -> None:
        """Time out every honest session that has not completed."""
        for runtime in self.runtimes.values():
            for session in runtime.sessions.values():
                session.expire()

    def sessions(self) -> list[Bb84Session]:
        return [s for r in self.runtimes.values() for s in r.sessions.values()]
