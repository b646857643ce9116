"""Parties, value pairs, sessions and the freshness predicate.

A :class:`World` is one simulation universe: a global event clock, the
registered parties with their value-pair memories, the partnering log the
adversary's leakage queries write into, and the registry of session outputs
produced by honest parties.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

PartyId = str

STATIC = "static"
EPHEMERAL = "ephemeral"
UNUSED = "unused"


class ModelError(Exception):
    pass


class UnknownParty(ModelError):
    pass


class LookupFailure(ModelError):
    """A Partner query named something the party does not hold."""


class MissingCompletion(ModelError):
    pass


@dataclass(frozen=True, order=True)
class SessionId:
    owner: PartyId
    local_id: int

    def __str__(self) -> str:
        return f"{self.owner}#{self.local_id}"

    @classmethod
    def parse(cls, text: str) -> "SessionId":
        owner, _, local = text.rpartition("#")
        if not owner or not local.isdigit():
            raise ValueError(f"malformed session id {text!r}")
        return cls(owner, int(local))


@dataclass(frozen=True)
class Party:
    pid: PartyId
    honest: bool = True


@dataclass
class ValuePair:
    """A private value ``x`` and its public part ``X`` (public key or label)."""

    private_value: Any
    public_part: str
    kind: str
    owner: PartyId
    purpose: str
    session: SessionId | None = None


@dataclass(frozen=True)
class SessionOutput:
    sk: str
    pid: PartyId
    v: tuple[tuple[str, ...], ...]
    u: tuple[tuple[str, ...], ...]

    def to_json(self) -> dict:
        return {"sk": self.sk, "pid": self.pid,
                "v": [list(x) for x in self.v], "u": [list(x) for x in self.u]}


@dataclass(frozen=True)
class LogEntry:
    ordinal: int
    kind: str  # "RevealNext" | "Partner"
    party: PartyId
    target: str | SessionId

    def to_json(self) -> dict:
        return {"ordinal": self.ordinal, "kind": self.kind, "party": self.party,
                "target": str(self.target),
                "target_type": "session" if isinstance(self.target, SessionId) else "public"}


@dataclass
class PartneringLog:
    entries: list[LogEntry] = field(default_factory=list)
    completion_marks: dict[SessionId, int] = field(default_factory=dict)

    def _last_ordinal(self) -> int:
        ords = [e.ordinal for e in self.entries] + list(self.completion_marks.values())
        return max(ords, default=-1)

    def append(self, entry: LogEntry) -> None:
        if entry.ordinal <= self._last_ordinal():
            raise ValueError("partnering log ordinals must strictly increase")
        self.entries.append(entry)

    def mark_complete(self, sid: SessionId, ordinal: int) -> None:
        if sid in self.completion_marks:
            raise ValueError(f"session {sid} already marked complete")
        if ordinal <= self._last_ordinal():
            raise ValueError("partnering log ordinals must strictly increase")
        self.completion_marks[sid] = ordinal

    def partnered_public(self, up_to: int | None = None) -> set[str]:
        return {e.target for e in self.entries
                if e.kind == "Partner" and isinstance(e.target, str)
                and (up_to is None or e.ordinal <= up_to)}

    def partnered_sessions(self) -> set[SessionId]:
        return {e.target for e in self.entries
                if e.kind == "Partner" and isinstance(e.target, SessionId)}

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries],
                "completion_marks": {str(k): v for k, v in
                                     sorted(self.completion_marks.items())}}


def check_correctness(out_a: SessionOutput, out_b: SessionOutput) -> bool:
    return out_a.sk == out_b.sk and out_a.v == out_b.v


def evaluate_freshness(output: SessionOutput, sid: SessionId, log: PartneringLog,
                       all_outputs: Mapping[SessionId, SessionOutput]) -> bool:
    """Decide whether completed session ``sid`` with ``output`` is fresh.

    ``all_outputs`` holds the outputs of honest sessions only. Every listed
    component of ``v`` is checked, starting from ``v[0]``; likewise for ``u``.
    """
    if sid not in log.completion_marks:
        raise MissingCompletion(f"no completion mark for {sid}")

    ever = log.partnered_public()
    for vec in output.v:
        if all(x in ever for x in vec):
            return False

    revealed = log.partnered_sessions()
    if sid in revealed:
        return False
    for other, out in all_outputs.items():
        if out.v == output.v and other in revealed:
            return False

    at_completion = log.partnered_public(up_to=log.completion_marks[sid])
    for vec in output.u:
        if all(x in at_completion for x in vec):
            return False
    return True


PairGenerator = Callable[[np.random.Generator], Any]


class World:
    """Shared state of one simulation: clock, parties, memories, log, outputs.

    ``generators`` maps a value-pair purpose (``"data"``, ``"basis"``, ...) to
    the routine that draws a fresh private value from a party's r-tape.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0,
                 generators: Mapping[str, PairGenerator] | None = None):
        self._seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.generators: dict[str, PairGenerator] = dict(generators or {})
        self.clock = 0
        self.parties: dict[PartyId, Party] = {}
        self.rngs: dict[PartyId, np.random.Generator] = {}
        self.memory: dict[PartyId, list[ValuePair]] = {}
        self.log = PartneringLog()
        self.outputs: dict[SessionId, SessionOutput] = {}
        self.aborted: dict[SessionId, str] = {}
        self._session_counter: dict[PartyId, itertools.count] = {}
        self._label_counter = itertools.count(1)
        # authenticated public strings (verify keys), distributed by construction
        self.public_keys: dict[PartyId, str] = {}
        (nature_seq,) = self._seq.spawn(1)
        # outcomes of quantum measurements; not any party's r-tape
        self.nature = np.random.default_rng(nature_seq)
        self.listeners: list[Callable[[int, str, dict], None]] = []

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    def tick(self) -> int:
        self.clock += 1
        return self.clock

    def register_party(self, pid: PartyId, honest: bool = True) -> Party:
        if pid in self.parties:
            raise ModelError(f"party {pid!r} already registered")
        party = Party(pid, honest)
        self.parties[pid] = party
        (child,) = self._seq.spawn(1)
        self.rngs[pid] = np.random.default_rng(child)
        self.memory[pid] = []
        self._session_counter[pid] = itertools.count(1)
        return party

    def party(self, pid: PartyId) -> Party:
        try:
            return self.parties[pid]
        except KeyError:
            raise UnknownParty(pid) from None

    def is_honest(self, pid: PartyId) -> bool:
        return self.party(pid).honest

    def mint_label(self, pid: PartyId, purpose: str) -> str:
        # Labels are opaque handles: a global counter, never a function of x.
        return f"L{next(self._label_counter)}:{pid}:{purpose}"

    def mint_session(self, pid: PartyId) -> SessionId:
        self.party(pid)
        return SessionId(pid, next(self._session_counter[pid]))

    def add_pair(self, pid: PartyId, purpose: str, private_value: Any, kind: str,
                 public_part: str | None = None, session: SessionId | None = None) -> ValuePair:
        self.party(pid)
        public = public_part if public_part is not None else self.mint_label(pid, purpose)
        if any(p.public_part == public for p in self.memory[pid]):
            raise ModelError(f"public part {public!r} already held by {pid}")
        pair = ValuePair(private_value, public, kind, pid, purpose, session)
        self.memory[pid].append(pair)
        if not self.parties[pid].honest:
            # adversary-controlled parties leak everything they hold
            self._log_query("Partner", pid, public)
        return pair

    def generate_pair(self, pid: PartyId, purpose: str, kind: str,
                      session: SessionId | None = None) -> ValuePair:
        try:
            gen = self.generators[purpose]
        except KeyError:
            raise ModelError(f"no generator for value-pair purpose {purpose!r}") from None
        return self.add_pair(pid, purpose, gen(self.rngs[self.party(pid).pid]), kind,
                             session=session)

    def take_pair(self, pid: PartyId, purpose: str, session: SessionId) -> ValuePair:
        """Bind the oldest unused pair of ``purpose`` to ``session``, or draw one."""
        for pair in self.memory[pid]:
            if pair.kind == UNUSED and pair.purpose == purpose:
                pair.kind = EPHEMERAL
                pair.session = session
                return pair
        return self.generate_pair(pid, purpose, EPHEMERAL, session)

    def find_pair(self, pid: PartyId, public_part: str) -> ValuePair | None:
        for pair in self.memory.get(pid, ()):
            if pair.public_part == public_part:
                return pair
        return None

    def _log_query(self, kind: str, pid: PartyId, target) -> int:
        ordinal = self.tick()
        self.log.append(LogEntry(ordinal, kind, pid, target))
        for cb in self.listeners:
            cb(ordinal, "query", {"kind": kind, "party": pid, "target": str(target)})
        return ordinal

    # adversary leakage queries

    def reveal_next(self, pid: PartyId, purpose: str) -> str:
        pair = self.generate_pair(pid, purpose, UNUSED)
        self._log_query("RevealNext", pid, pair.public_part)
        return pair.public_part

    def partner(self, pid: PartyId, target: str | SessionId) -> Any:
        self.party(pid)
        if isinstance(target, SessionId):
            if target.owner != pid or target not in self.outputs:
                raise LookupFailure(f"{pid} holds no session key for {target}")
            value = self.outputs[target].sk
        else:
            pair = self.find_pair(pid, target)
            if pair is None:
                raise LookupFailure(f"{pid} holds no value pair {target!r}")
            value = pair.private_value
        self._log_query("Partner", pid, target)
        return value

    # session completion

    def complete(self, sid: SessionId, output: SessionOutput | None, cause: str | None = None) -> int:
        if sid in self.outputs or sid in self.aborted:
            raise ModelError(f"session {sid} already completed")
        ordinal = self.tick()
        if output is None:
            self.aborted[sid] = cause or "error"
        else:
            if self.is_honest(sid.owner):
                self.outputs[sid] = output
            self.log.mark_complete(sid, ordinal)
        for cb in self.listeners:
            cb(ordinal, "complete", {"sid": str(sid), "ok": output is not None,
                                     "cause": cause})
        return ordinal

    def is_fresh(self, sid: SessionId) -> bool:
        if not self.is_honest(sid.owner):
            return False
        return evaluate_freshness(self.outputs[sid], sid, self.log, self.outputs)
