"""Adversary strategies that drive one protocol run through the network.

Each strategy is the network: it decides what happens to every message and
qubit frame, issues its leakage queries before or after the run, may pick the
session to be tested, and finally guesses the Test bit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..bb84 import BASIS, DATA, IR, PA, SIG, Bb84Session
from ..model import EPHEMERAL, SessionId, World
from ..quantum import EveRecord, QubitFrame, intercept_resend, measure, prepare
from ..wire import CHECK, RECON, ClassicalMessage
from .network import Network, PartyRuntime, QuantumSend
from .offline import recompute_key

MAX_EVENTS = 10_000
ADVERSARY = "E"


@dataclass
class TrialContext:
    world: World
    network: Network
    rng: np.random.Generator
    initiator: str = "A"
    responder: str = "B"
    session: Bb84Session | None = None  # the initiator's honest session
    known_keys: set = field(default_factory=set)
    revealed: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def honest_sessions(self) -> list[Bb84Session]:
        return self.network.sessions()


class Strategy:
    name = "strategy"
    needs_adversary_party = False

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        args = ":".join(str(v) for v in self.params().values())
        return f"{self.name}:{args}" if args else self.name

    def before(self, ctx: TrialContext) -> None:
        pass

    def after(self, ctx: TrialContext) -> None:
        pass

    def on_message(self, ctx: TrialContext, msg: ClassicalMessage) -> list[ClassicalMessage]:
        return [msg]

    def on_frame(self, ctx: TrialContext, item: QuantumSend) -> QubitFrame | None:
        return item.frame

    def run(self, ctx: TrialContext) -> None:
        net = ctx.network
        ctx.session, out = net.initiate(ctx.initiator, ctx.responder)
        queue = deque(out)
        steps = 0
        while queue:
            steps += 1
            if steps > MAX_EVENTS:
                raise RuntimeError("network did not quiesce")
            item = queue.popleft()
            if isinstance(item, QuantumSend):
                frame = self.on_frame(ctx, item)
                if frame is not None:
                    handle = item.handle if frame is item.frame else None
                    queue.extend(net.deliver_frame(item.receiver, frame, handle))
            else:
                for msg in self.on_message(ctx, item):
                    queue.extend(net.deliver(msg))
        net.expire()

    def choose_test(self, ctx: TrialContext) -> SessionId | None:
        """The initiator's session if it completed, else any completed honest one."""
        candidates = [ctx.session] if ctx.session else []
        candidates += [s for s in ctx.honest_sessions() if s is not ctx.session]
        for s in candidates:
            if s.output is not None:
                return s.sid
        return None

    def learn_key_from_data(self, ctx: TrialContext, data_bits: str) -> None:
        if ctx.session is None or ctx.session.output is None:
            return
        key = recompute_key(data_bits, ctx.network.transcript.session_messages(str(ctx.session.sid)))
        if key is not None:
            ctx.known_keys.add(key)

    def guess(self, ctx: TrialContext, answer: str) -> int:
        if ctx.known_keys:
            return int(answer in ctx.known_keys)
        # no side information: a fixed parity test on the challenge
        return int(answer.count("1") % 2 == 0)


class PassiveRelay(Strategy):
    name = "passive_relay"


class InterceptResendStrategy(Strategy):
    name = "intercept_resend"

    def __init__(self, fraction: float = 1.0):
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"fraction {fraction} outside [0, 1]")
        self.fraction = fraction

    def params(self):
        return {"fraction": self.fraction}

    def on_frame(self, ctx, item):
        frame, record = intercept_resend(item.frame, self.fraction, ctx.rng)
        ctx.network.log_eve(record, item.handle)
        return frame


class ShadowEndpoint:
    """The adversary posing as ``pid``: its pairs live with the dishonest party."""

    def __init__(self, world: World, scheme, pid: str, rng, signing_key=None):
        self.world = world
        self.scheme = scheme
        self.pid = pid
        self.rng = rng
        self.nature = rng
        self.signing_key = signing_key
        self.completed: dict[SessionId, tuple] = {}
        self._local = 1_000_000

    def mint_session(self):
        self._local += 1
        return SessionId(self.pid, self._local)

    def take_pair(self, purpose, sid):
        return self.world.generate_pair(ADVERSARY, purpose, EPHEMERAL, session=sid)

    def store_pair(self, purpose, value, sid):
        return self.world.add_pair(ADVERSARY, purpose, value, EPHEMERAL, session=sid)

    def verify_key(self, pid):
        return self.world.public_keys[pid]

    def sign(self, data):
        vk = self.world.public_keys[self.pid]
        if self.signing_key is not None:
            return self.scheme.sign(vk, self.signing_key, data, origin="adversary")
        # no key: a well-formed but fabricated tag
        return self.rng.bytes(self.scheme.tag_hex_len // 2).hex()

    def verify(self, pid, data, tag):
        return True

    def complete(self, sid, output, cause):
        self.completed[sid] = (output, cause)


class MitmForger(Strategy):
    """Man in the middle running separate impostor sessions with A and with B."""

    name = "mitm_forger"
    needs_adversary_party = True

    def __init__(self, partner_before: bool = False):
        self.partner_before = partner_before

    def params(self):
        return {"partner_before": "pre" if self.partner_before else "none"}

    def before(self, ctx):
        ctx.notes["keys"] = {}
        if self.partner_before:
            for pid in (ctx.initiator, ctx.responder):
                ctx.notes["keys"][pid] = ctx.world.partner(pid, ctx.world.public_keys[pid])

    def run(self, ctx):
        net, world = ctx.network, ctx.world
        a, b = ctx.initiator, ctx.responder
        keys = ctx.notes["keys"]
        fake_b = ShadowEndpoint(world, net.scheme, b, ctx.rng, keys.get(b))
        fake_a = ShadowEndpoint(world, net.scheme, a, ctx.rng, keys.get(a))
        towards_a = PartyRuntime(fake_b, net.config)   # talks to honest A
        towards_b = PartyRuntime(fake_a, net.config)   # talks to honest B

        ctx.session, out_a = net.initiate(a, b)
        _, first, frame = towards_b.open(b)
        # (True, item): forged traffic for an honest party; (False, item): honest output
        queue = deque((False, item) for item in out_a)
        queue.append((True, first[0]))
        queue.append((True, QuantumSend(b, frame, 0)))
        steps = 0
        while queue:
            steps += 1
            if steps > MAX_EVENTS:
                raise RuntimeError("network did not quiesce")
            forged, item = queue.popleft()
            if forged:
                if isinstance(item, QuantumSend):
                    replies = net.deliver_frame(item.receiver, item.frame)
                else:
                    replies = net.deliver(item)
                queue.extend((False, r) for r in replies)
            elif isinstance(item, QuantumSend):
                queue.extend((True, r) for r in towards_a.handle_frame(item.frame))
            else:
                runtime = towards_a if item.sender == a else towards_b
                queue.extend((True, r) for r in runtime.handle(item))
        net.expire()
        for shadow in (fake_a, fake_b):
            for output, _ in shadow.completed.values():
                if output is not None:
                    ctx.known_keys.add(output.sk)
        ctx.notes["adversary_keys"] = sorted(ctx.known_keys)


REVEAL_TARGETS = {
    "static": None, "own-static": None,
    "basis": BASIS, "data": DATA, "ir": IR, "pa": PA,
}
# position of each per-session pair in the output vector v
_V_INDEX = {DATA: 0, BASIS: 1, IR: 4, PA: 5}
# values the protocol itself sends in the clear: (message tag, field names)
_BROADCAST = {BASIS: (CHECK, ("b_A",)), IR: (RECON, ("F",)), PA: (RECON, ("P", "G"))}


class RandomnessReveal(Strategy):
    """Passive relay plus a Partner query on one value pair, before or after the run.

    Targets refer to the initiator's session: ``static`` is the peer's
    signing key (the element of u), ``own-static`` the initiator's own.
    """

    name = "randomness_reveal"

    def __init__(self, target: str = "basis", when: str = "pre"):
        if target not in REVEAL_TARGETS:
            raise ValueError(f"unknown reveal target {target!r}")
        if when not in ("pre", "post"):
            raise ValueError("when must be 'pre' or 'post'")
        self.target, self.when = target, when

    def params(self):
        return {"target": self.target, "when": self.when}

    def _static_owner(self, ctx):
        return ctx.responder if self.target == "static" else ctx.initiator

    def before(self, ctx):
        if self.when != "pre":
            return
        world = ctx.world
        if REVEAL_TARGETS[self.target] is None:
            owner = self._static_owner(ctx)
            ctx.revealed[SIG] = world.partner(owner, world.public_keys[owner])
            return
        label = world.reveal_next(ctx.initiator, REVEAL_TARGETS[self.target])
        ctx.revealed[REVEAL_TARGETS[self.target]] = world.partner(ctx.initiator, label)

    def on_frame(self, ctx, item):
        bases = ctx.revealed.get(BASIS)
        if bases is None or item.receiver != ctx.responder:
            return item.frame
        # knowing the bases, read every qubit without disturbing it
        outcome = measure(item.frame, bases, ctx.rng)
        ctx.revealed[DATA] = outcome
        ctx.network.log_eve(EveRecord([(i, int(bb), int(o)) for i, (bb, o)
                                       in enumerate(zip(bases, outcome))]), item.handle)
        return prepare(bases, outcome, origin=item.frame.origin)

    def after(self, ctx):
        world = ctx.world
        if self.when == "post":
            if REVEAL_TARGETS[self.target] is None:
                owner = self._static_owner(ctx)
                ctx.revealed[SIG] = world.partner(owner, world.public_keys[owner])
            elif ctx.session is not None and ctx.session.output is not None:
                purpose = REVEAL_TARGETS[self.target]
                if purpose in _BROADCAST:
                    # already public once the run is over; no Partner needed
                    msgs = ctx.network.transcript.session_messages(str(ctx.session.sid))
                    tag, names = _BROADCAST[purpose]
                    ctx.revealed[purpose] = tuple(msgs[tag].get(n) for n in names)
                    ctx.notes["route"] = "broadcast"
                else:
                    label = ctx.session.output.v[_V_INDEX[purpose]][0]
                    ctx.revealed[purpose] = world.partner(ctx.initiator, label)
                    ctx.notes["route"] = "partner"
        if DATA in ctx.revealed:
            self.learn_key_from_data(ctx, ctx.revealed[DATA])


def build_strategy(spec: str) -> Strategy:
    """Parse ``name[:arg[:arg]]``, e.g. ``intercept_resend:0.2`` or ``randomness_reveal:data:post``."""
    name, *args = spec.split(":")
    if name == PassiveRelay.name and not args:
        return PassiveRelay()
    if name == InterceptResendStrategy.name and len(args) <= 1:
        return InterceptResendStrategy(float(args[0]) if args else 1.0)
    if name == MitmForger.name and len(args) <= 1:
        flag = args[0] if args else "none"
        if flag not in ("pre", "none"):
            raise ValueError("mitm_forger takes 'pre' or 'none'")
        return MitmForger(partner_before=flag == "pre")
    if name == RandomnessReveal.name and len(args) == 2:
        return RandomnessReveal(args[0], args[1])
    raise ValueError(f"unknown strategy spec {spec!r}")
