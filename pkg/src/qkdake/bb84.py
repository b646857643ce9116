"""BB84 with signed classical messages, as a message-driven session machine.

Initiator A and responder B run seven activations:

1. A draws data bits and bases, sends qubits and ``start``.
2. B draws its bases on ``start`` and arms its detector.
3. B measures the delivered frame and sends its signed bases.
4. A verifies, sifts, picks check positions, sends signed bases/indices/check bits.
5. B verifies, sifts, estimates the error rate, aborts above threshold,
   otherwise signs and returns the rate.
6. A verifies, builds the reconciliation hash and the amplifier, sends them
   signed, and outputs its key.
7. B verifies, reconciles, amplifies, and outputs its key.

A message whose signature fails, or which arrives at the wrong stage, is
dropped and counted; the session state is left untouched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import infotheory as it
from .bits import check_bits, random_bits
from .model import EPHEMERAL, SessionId, SessionOutput, ValuePair, World
from .quantum import QubitFrame, measure, prepare
from .wire import BASES, CHECK, EPS, RECON, START, ClassicalMessage

INITIATOR = "initiator"
RESPONDER = "responder"
MIN_N1 = 16

# purposes of the per-session value pairs, in output-vector order
DATA = "data"
BASIS = "basis"
IR = "ir"
PA = "pa"
SIG = "sig"

ABORT_THRESHOLD = "abort-threshold"
NO_CHECK_BITS = "no-check-bits"
NO_CANDIDATE = "no-candidate"
ZERO_LENGTH_KEY = "zero-length-key"
MALFORMED = "malformed"
TIMEOUT = "timeout"


class Bb84Error(Exception):
    pass


class SigFail(Bb84Error):
    pass


class StageMismatch(Bb84Error):
    pass


class Abort(Bb84Error):
    def __init__(self, cause: str, detail: str = ""):
        super().__init__(f"{cause}: {detail}" if detail else cause)
        self.cause = cause


@dataclass(frozen=True)
class Bb84Config:
    n1: int = 256
    abort_threshold: float = it.ABORT_THRESHOLD
    max_weight: int | None = None
    reconcile_budget: int = 50_000

    def __post_init__(self):
        if self.n1 < MIN_N1:
            raise ValueError(f"n1 must be at least {MIN_N1}, got {self.n1}")
        if not 0.0 < self.abort_threshold < 0.5:
            raise ValueError("abort threshold must lie in (0, 0.5)")

    def max_weight_for(self, n3: int) -> int:
        if self.max_weight is not None:
            return self.max_weight
        return min(it.default_max_weight(n3), it.max_weight_for_budget(n3, self.reconcile_budget))


def seed_generator(rng: np.random.Generator) -> int:
    return it.random_int_bits(rng, 128)


def generators(config: Bb84Config) -> dict:
    """Value-pair generators for a world running BB84 with ``config``."""
    return {DATA: lambda rng: random_bits(rng, config.n1),
            BASIS: lambda rng: random_bits(rng, config.n1),
            IR: seed_generator,
            PA: seed_generator}


def derive_ir_hash(seed: int, n3: int, out_len: int) -> it.HashParams:
    return it.sample_hash(it.padded_width(n3), out_len, np.random.default_rng(seed))


def derive_amplifier(seed: int, n3: int, out_len: int) -> it.PaParams:
    rng = np.random.default_rng(seed)
    perm = it.sample_permutation(n3, rng)
    return it.PaParams(perm, it.sample_hash(it.padded_width(n3), out_len, rng))


def sift(b_own: str, b_peer: str, bits: str) -> str:
    if not len(b_own) == len(b_peer) == len(bits):
        raise ValueError("sift inputs differ in length")
    return "".join(x for x, p, q in zip(bits, b_own, b_peer) if p == q)


def split_check_key(sifted: str, ind: str) -> tuple[str, str]:
    if len(sifted) != len(ind):
        raise ValueError("check-index string does not match sifted length")
    chk = "".join(x for x, i in zip(sifted, ind) if i == "1")
    key = "".join(x for x, i in zip(sifted, ind) if i == "0")
    return chk, key


class Endpoint(Protocol):
    """What a session needs from the party (or impostor) running it."""

    pid: str
    rng: np.random.Generator
    nature: np.random.Generator

    def mint_session(self) -> SessionId: ...
    def take_pair(self, purpose: str, sid: SessionId) -> ValuePair: ...
    def store_pair(self, purpose: str, value, sid: SessionId) -> ValuePair: ...
    def verify_key(self, pid: str) -> str: ...
    def sign(self, data: bytes) -> str: ...
    def verify(self, pid: str, data: bytes, tag: str) -> bool: ...
    def complete(self, sid: SessionId, output: SessionOutput | None, cause: str | None) -> None: ...


class HonestEndpoint:
    """An honest party: r-tape, memory and signing key held by the world."""

    def __init__(self, world: World, scheme, pid: str, keypair):
        self.world = world
        self.scheme = scheme
        self.pid = pid
        self.keypair = keypair
        self.rng = world.rngs[pid]
        self.nature = world.nature

    def mint_session(self):
        return self.world.mint_session(self.pid)

    def take_pair(self, purpose, sid):
        return self.world.take_pair(self.pid, purpose, sid)

    def store_pair(self, purpose, value, sid):
        return self.world.add_pair(self.pid, purpose, value, EPHEMERAL, session=sid)

    def verify_key(self, pid):
        return self.world.public_keys[pid]

    def sign(self, data):
        return self.scheme.sign(self.keypair.verify_key, self.keypair.signing_key, data)

    def verify(self, pid, data, tag):
        vk = self.world.public_keys.get(pid)
        return vk is not None and self.scheme.verify(vk, data, tag)

    def complete(self, sid, output, cause):
        self.world.complete(sid, output, cause)


class Stage(enum.IntEnum):
    """Index of the last activation the session has processed."""

    NEW = 0
    SENT_START = 1
    ARMED = 2
    SENT_BASES = 3
    SENT_CHECK = 4
    SENT_EPS = 5
    DONE = 6
    ABORTED = 99


@dataclass
class Bb84Session:
    endpoint: Endpoint
    role: str
    config: Bb84Config
    peer: str
    sid: SessionId
    stage: Stage = Stage.NEW
    sid_peer: str = ""
    d: str = ""
    b_own: str = ""
    b_peer: str = ""
    ind: str = ""
    chk: str = ""
    k: str = ""
    eps: float | None = None
    n2: int | None = None
    r_len: int | None = None
    s_len: int | None = None
    f: it.HashParams | None = None
    f_val: str = ""
    pa: it.PaParams | None = None
    labels: dict = field(default_factory=dict)
    output: SessionOutput | None = None
    abort_cause: str | None = None
    errors: list[str] = field(default_factory=list)

    @property
    def n1(self) -> int:
        return self.config.n1

    @property
    def n3(self) -> int:
        return len(self.k)

    @property
    def done(self) -> bool:
        return self.stage in (Stage.DONE, Stage.ABORTED)

    @property
    def sid_a(self) -> str:
        return str(self.sid) if self.role == INITIATOR else self.sid_peer

    @property
    def sid_b(self) -> str:
        return self.sid_peer if self.role == INITIATOR else str(self.sid)

    def _message(self, tag, fields) -> ClassicalMessage:
        msg = ClassicalMessage(tag, self.endpoint.pid, self.peer, self.sid_a, self.sid_b,
                               tuple(fields))
        return msg.with_signature(self.endpoint.sign(msg.signed_bytes()))

    def _output_vectors(self):
        order = ("dA", "bA", "dB", "bB", "F", "PG")
        v = tuple((self.labels[name],) for name in order)
        u = ((self.endpoint.verify_key(self.peer),),)
        return v, u

    def _finish(self, sk: str) -> None:
        v, u = self._output_vectors()
        self.output = SessionOutput(sk=sk, pid=self.peer, v=v, u=u)
        self.stage = Stage.DONE
        self.endpoint.complete(self.sid, self.output, None)

    def _abort(self, cause: str) -> None:
        self.abort_cause = cause
        self.stage = Stage.ABORTED
        self.endpoint.complete(self.sid, None, cause)

    def expire(self) -> None:
        if not self.done:
            self._abort(TIMEOUT)

    # activation 1

    def start(self) -> tuple[ClassicalMessage, QubitFrame]:
        if self.role != INITIATOR or self.stage != Stage.NEW:
            raise StageMismatch("only a fresh initiator session can start")
        data = self.endpoint.take_pair(DATA, self.sid)
        basis = self.endpoint.take_pair(BASIS, self.sid)
        if len(data.private_value) != self.n1 or len(basis.private_value) != self.n1:
            raise Bb84Error("stored data/basis pairs do not match n1")
        self.d, self.b_own = data.private_value, basis.private_value
        self.labels.update(dA=data.public_part, bA=basis.public_part)
        frame = prepare(self.b_own, self.d, origin=self.endpoint.pid)
        msg = ClassicalMessage(START, self.endpoint.pid, self.peer, str(self.sid), "",
                               (("role", RESPONDER), ("initiator", self.endpoint.pid)))
        self.stage = Stage.SENT_START
        return msg, frame

    # activation 2

    def arm(self, start: ClassicalMessage) -> None:
        if self.role != RESPONDER or self.stage != Stage.NEW:
            raise StageMismatch("only a fresh responder session can be armed")
        basis = self.endpoint.take_pair(BASIS, self.sid)
        if len(basis.private_value) != self.n1:
            raise Bb84Error("stored basis pair does not match n1")
        self.sid_peer = start.sid_a
        self.b_own = basis.private_value
        self.labels["bB"] = basis.public_part
        self.stage = Stage.ARMED

    # activation 3 (quantum delivery, then Q2C internally)

    def on_qubits(self, frame: QubitFrame) -> list[ClassicalMessage]:
        if self.stage != Stage.ARMED:
            self.errors.append("stage")
            return []
        if len(frame) != self.n1:
            self.errors.append("frame-size")
            return []
        outcome = measure(frame, self.b_own, self.endpoint.nature)
        data = self.endpoint.store_pair(DATA, outcome, self.sid)
        self.d = outcome
        self.labels["dB"] = data.public_part
        self.stage = Stage.SENT_BASES
        return [self._message(BASES, (("b_B", self.b_own),
                                      ("l_dB", self.labels["dB"]),
                                      ("l_bB", self.labels["bB"])))]

    def process(self, msg: ClassicalMessage) -> list[ClassicalMessage]:
        """Handle one classical message; failures are dropped and counted."""
        handlers = {(INITIATOR, BASES): (Stage.SENT_START, self._on_bases),
                    (RESPONDER, CHECK): (Stage.SENT_BASES, self._on_check),
                    (INITIATOR, EPS): (Stage.SENT_CHECK, self._on_eps),
                    (RESPONDER, RECON): (Stage.SENT_EPS, self._on_recon)}
        try:
            expected, handler = handlers.get((self.role, msg.tag), (None, None))
            if handler is None or self.stage != expected:
                raise StageMismatch(f"{msg.tag!r} unexpected at stage {self.stage.name}")
            if msg.sid_a != self.sid_a or (self.sid_b and msg.sid_b != self.sid_b):
                raise StageMismatch("session identifiers do not match")
            if not self.endpoint.verify(self.peer, msg.signed_bytes(), msg.signature):
                raise SigFail(f"signature on {msg.tag!r} does not verify")
            return handler(msg)
        except (StageMismatch, SigFail, ValueError, KeyError, TypeError) as exc:
            self.errors.append(type(exc).__name__)
            return []
        except Abort as exc:
            self._abort(exc.cause)
            return []

    # activation 4

    def _on_bases(self, msg):
        b_peer = check_bits(msg.get("b_B"), "b_B")
        sid_b = SessionId.parse(msg.sid_b)
        if sid_b.owner != self.peer:
            raise StageMismatch("peer session id is not owned by the peer")
        sifted = sift(self.b_own, b_peer, self.d)
        labels = {"dB": str(msg.get("l_dB")), "bB": str(msg.get("l_bB"))}
        ind = random_bits(self.endpoint.rng, len(sifted))
        chk, key = split_check_key(sifted, ind)
        self.sid_peer, self.b_peer = msg.sid_b, b_peer
        self.ind, self.chk, self.k, self.n2 = ind, chk, key, len(sifted)
        self.labels.update(labels)
        self.stage = Stage.SENT_CHECK
        return [self._message(CHECK, (("b_A", self.b_own), ("ind", ind), ("chk", chk),
                                      ("l_dA", self.labels["dA"]),
                                      ("l_bA", self.labels["bA"])))]

    # activation 5

    def _on_check(self, msg):
        b_peer = check_bits(msg.get("b_A"), "b_A")
        ind = check_bits(msg.get("ind"), "ind")
        chk_a = check_bits(msg.get("chk"), "chk")
        sifted = sift(self.b_own, b_peer, self.d)
        chk, key = split_check_key(sifted, ind)
        if len(chk) != len(chk_a):
            raise ValueError("check-bit length mismatch")
        self.b_peer, self.ind, self.chk, self.k, self.n2 = b_peer, ind, chk, key, len(sifted)
        self.labels.update(dA=str(msg.get("l_dA")), bA=str(msg.get("l_bA")))
        if not chk:
            raise Abort(NO_CHECK_BITS)
        self.eps = sum(x != y for x, y in zip(chk, chk_a)) / len(chk)
        if self.eps > self.config.abort_threshold:
            raise Abort(ABORT_THRESHOLD, f"eps={self.eps:.4f}")
        self.stage = Stage.SENT_EPS
        return [self._message(EPS, (("eps", self.eps),))]

    # activation 6

    def _on_eps(self, msg):
        eps = float(msg.get("eps"))
        if not 0.0 <= eps <= self.config.abort_threshold:
            raise Abort(ABORT_THRESHOLD, f"reported eps={eps}")
        self.eps = eps
        n3 = self.n3
        if n3 == 0:
            raise Abort(ZERO_LENGTH_KEY, "no key bits after sifting")
        self.r_len = it.ir_output_len(n3, eps)
        self.s_len = it.pa_output_len(n3, eps)
        if self.s_len == 0:
            raise Abort(ZERO_LENGTH_KEY, f"n3={n3}, eps={eps}")
        ir_pair = self.endpoint.take_pair(IR, self.sid)
        pa_pair = self.endpoint.take_pair(PA, self.sid)
        self.labels.update(F=ir_pair.public_part, PG=pa_pair.public_part)
        self.f = derive_ir_hash(ir_pair.private_value, n3, self.r_len)
        self.f_val = it.hash_eval(self.f, it.pad_to_width(self.k, self.f.w))
        self.pa = derive_amplifier(pa_pair.private_value, n3, self.s_len)
        sk = it.privacy_amplify(self.k, self.pa)
        out = self._message(RECON, (("F", self.f.to_fields()), ("F_val", self.f_val),
                                    ("P", self.pa.perm.mapping), ("G", self.pa.hash.to_fields()),
                                    ("l_F", self.labels["F"]), ("l_PG", self.labels["PG"])))
        self._finish(sk)
        return [out]

    # activation 7

    def _on_recon(self, msg):
        f = it.HashParams.from_fields(msg.get("F"))
        f_val = check_bits(msg.get("F_val"), "F_val")
        pa = it.PaParams(it.Permutation(tuple(msg.get("P"))), it.HashParams.from_fields(msg.get("G")))
        if f.w != it.padded_width(self.n3) or len(pa.perm) != self.n3:
            raise Abort(MALFORMED, "hash or permutation does not fit the key length")
        self.labels.update(F=str(msg.get("l_F")), PG=str(msg.get("l_PG")))
        self.f, self.f_val, self.pa = f, f_val, pa
        self.r_len, self.s_len = f.out_len, pa.hash.out_len
        try:
            corrected = it.reconcile(self.k, f, f_val, self.config.max_weight_for(self.n3))
        except it.NoCandidate:
            raise Abort(NO_CANDIDATE) from None
        self.k = corrected
        self._finish(it.privacy_amplify(corrected, pa))
        return []


def init_session(endpoint: Endpoint, role: str, config: Bb84Config, peer: str,
                 start: ClassicalMessage | None = None):
    """Open a session. Initiators return their ``start`` message and qubit frame."""
    session = Bb84Session(endpoint, role, config, peer, endpoint.mint_session())
    if role == INITIATOR:
        msg, frame = session.start()
        return session, [msg], frame
    if role == RESPONDER:
        if start is None:
            raise StageMismatch("a responder session is created by a start message")
        session.arm(start)
        return session, [], None
    raise ValueError(f"unknown role {role!r}")
