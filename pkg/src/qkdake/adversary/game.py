"""The Test experiment, repeated over independent seeded trials."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np
from scipy.stats import binomtest

from .. import infotheory as it
from ..auth import make_scheme
from ..bb84 import Bb84Config
from ..bits import random_bits
from ..model import SessionId, SessionOutput, World, check_correctness
from .network import Network
from .offline import EnumerationBudgetExceeded, break_signatures, offline_analyze
from .strategies import ADVERSARY, TrialContext, build_strategy


class TestAlreadyUsed(Exception):
    __test__ = False


class TestOracle:
    """Real-or-random challenge; a game gets exactly one query."""

    __test__ = False

    def __init__(self, outputs: Mapping[SessionId, SessionOutput], rng: np.random.Generator):
        self.outputs = outputs
        self.rng = rng
        self.used = False

    def query(self, sid: SessionId, b: int) -> str | None:
        if self.used:
            raise TestAlreadyUsed("only one Test query is allowed per game")
        self.used = True
        out = self.outputs.get(sid)
        if out is None:
            return None
        return out.sk if b == 1 else random_bits(self.rng, len(out.sk))


def test_query(sid: SessionId, outputs: Mapping[SessionId, SessionOutput], b: int,
               rng: np.random.Generator) -> str | None:
    return TestOracle(outputs, rng).query(sid, b)


test_query.__test__ = False


@dataclass
class GameConfig:
    n_parties: int = 2
    sig_scheme: str = "ideal"
    strategy: str = "passive_relay"
    trials: int = 100
    seed: int = 0
    bb84: Bb84Config = field(default_factory=Bb84Config)
    keyspace: int = 1 << 16
    offline: bool = False
    # declared adversary bounds; None means unbounded. Not metered.
    t_c: int | None = None
    t_q: int | None = None
    m_q: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_parties < 2:
            raise ValueError("at least two parties are needed")
        build_strategy(self.strategy)
        make_scheme(self.sig_scheme, self.keyspace)

    def to_json(self) -> dict:
        d = asdict(self)
        d["bb84"] = asdict(self.bb84)
        return d


@dataclass
class TrialResult:
    trial: int
    initiator_ok: bool
    responder_ok: bool
    abort_causes: list[str]
    eps: float | None
    n1: int
    n2: int | None
    n3: int | None
    key_len: int | None
    correct: bool | None
    r_len: int | None
    s_len: int | None
    test_sid: str | None
    b: int | None
    guess: int | None
    fresh: bool | None
    forged_accepted: int
    discarded: int
    adversary_keys: int = 0
    adversary_keys_distinct: bool | None = None
    offline: dict | None = None
    broken_keys: int | None = None

    @property
    def completed(self) -> bool:
        return self.test_sid is not None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class GameResult:
    config: GameConfig
    strategy: str
    trials: list[TrialResult]
    transcripts: list[list[str]]
    aggregates: dict

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "strategy": self.strategy,
                "trials": [t.to_json() for t in self.trials], "aggregates": self.aggregates}


def _party_names(n: int) -> list[str]:
    return ["A", "B"] + [f"P{i}" for i in range(3, n + 1)]


def run_trial(config: GameConfig, index: int, seq: np.random.SeedSequence):
    world_seq, adv_seq, chal_seq = seq.spawn(3)
    world = World(world_seq)
    scheme = make_scheme(config.sig_scheme, config.keyspace)
    net = Network(world, scheme, config.bb84)
    for pid in _party_names(config.n_parties):
        net.add_party(pid)
    strategy = build_strategy(config.strategy)
    if strategy.needs_adversary_party:
        net.add_party(ADVERSARY, honest=False)
    ctx = TrialContext(world, net, np.random.default_rng(adv_seq))

    strategy.before(ctx)
    strategy.run(ctx)
    strategy.after(ctx)

    sessions = net.sessions()
    init = ctx.session
    resp = next((s for s in sessions if s.role == "responder"), None)
    causes = [s.abort_cause for s in sessions if s.abort_cause]
    correct = None
    if init is not None and resp is not None and init.output and resp.output:
        correct = check_correctness(init.output, resp.output)

    challenger = np.random.default_rng(chal_seq)
    test_sid = strategy.choose_test(ctx)
    b = guess = fresh = None
    if test_sid is not None:
        b = int(challenger.integers(0, 2))
        answer = TestOracle(world.outputs, challenger).query(test_sid, b)
        guess = strategy.guess(ctx, answer)
        fresh = world.is_fresh(test_sid)

    offline = broken = None
    if config.offline and init is not None:
        transcript = net.transcript
        broken = len(break_signatures(scheme, world.public_keys, transcript.messages))
        try:
            stats = offline_analyze(transcript.session_messages(str(init.sid)),
                                    transcript.eve_records, ctx.revealed)
            offline = stats.to_json()
        except EnumerationBudgetExceeded as exc:
            offline = {"skipped": str(exc)}

    keys = ctx.notes.get("adversary_keys", [])
    result = TrialResult(
        trial=index,
        initiator_ok=bool(init and init.output),
        responder_ok=bool(resp and resp.output),
        abort_causes=causes,
        eps=resp.eps if resp is not None else None,
        n1=config.bb84.n1,
        n2=init.n2 if init is not None else None,
        n3=init.n3 if init is not None and init.n2 is not None else None,
        key_len=len(init.output.sk) if init is not None and init.output else None,
        correct=correct,
        r_len=init.r_len if init is not None else None,
        s_len=init.s_len if init is not None else None,
        test_sid=str(test_sid) if test_sid is not None else None,
        b=b, guess=guess, fresh=fresh,
        forged_accepted=scheme.forged_accepted,
        discarded=sum(len(s.errors) for s in sessions),
        adversary_keys=len(keys),
        adversary_keys_distinct=(len(set(keys)) == len(keys) == 2) if keys else None,
        offline=offline, broken_keys=broken)
    return result, net.transcript.to_lines({"trial": index})


def advantage_summary(successes: int, n: int) -> dict:
    if n == 0:
        return {"samples": 0, "p_correct": None, "advantage": None, "ci95": None,
                "sigma": None, "within_4sigma": None}
    p = successes / n
    ci = binomtest(successes, n).proportion_ci(confidence_level=0.95, method="wilson")
    sigma = math.sqrt(0.25 / n)
    return {"samples": n, "p_correct": p, "advantage": abs(p - 0.5),
            "ci95": [float(ci.low), float(ci.high)], "sigma": sigma,
            "within_4sigma": abs(p - 0.5) <= 4 * sigma}


def _mean(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate(trials: list[TrialResult]) -> dict:
    n = len(trials)
    fresh = [t for t in trials if t.fresh]
    stale = [t for t in trials if t.completed and not t.fresh]
    both_ok = [t for t in trials if t.initiator_ok and t.responder_ok]
    causes: dict[str, int] = {}
    for t in trials:
        for c in t.abort_causes:
            causes[c] = causes.get(c, 0) + 1
    deltas = [it.security_delta(t.n3, t.r_len, t.s_len) for t in trials
              if t.key_len and t.r_len is not None and t.s_len is not None]
    tvs = [t.offline["tv_distance"] for t in trials if t.offline and "tv_distance" in t.offline]
    n2_ratio = [t.n2 / t.n1 for t in trials if t.n2 is not None]
    return {
        "trials": n,
        "completion_rate": len(both_ok) / n,
        "any_completed_rate": sum(t.completed for t in trials) / n,
        "abort_rate": sum(not (t.initiator_ok and t.responder_ok) for t in trials) / n,
        "abort_causes": dict(sorted(causes.items())),
        "correctness_rate": (sum(bool(t.correct) for t in both_ok) / len(both_ok)) if both_ok else None,
        "mean_eps": _mean(t.eps for t in trials),
        "mean_sifting_ratio": _mean(n2_ratio),
        "mean_key_len": _mean(t.key_len for t in trials),
        "fresh_rate": (len(fresh) / sum(t.completed for t in trials)) if any(t.completed for t in trials) else None,
        "advantage_fresh": advantage_summary(sum(t.guess == t.b for t in fresh), len(fresh)),
        "advantage_not_fresh": advantage_summary(sum(t.guess == t.b for t in stale), len(stale)),
        "forged_accepted_total": sum(t.forged_accepted for t in trials),
        "eps_sig_measured": sum(t.forged_accepted > 0 for t in trials) / n,
        "delta_bound_mean": min(1.0, _mean(deltas)) if deltas else None,
        "adversary_distinct_keys_rate": sum(bool(t.adversary_keys_distinct) for t in trials) / n,
        "offline_tv_max": max(tvs) if tvs else None,
        "offline_trials": len(tvs),
    }


def run_game(config: GameConfig) -> GameResult:
    children = np.random.SeedSequence(config.seed).spawn(config.trials)
    results, transcripts = [], []
    for i, child in enumerate(children):
        res, lines = run_trial(config, i, child)
        results.append(res)
        transcripts.append(lines)
    return GameResult(config, build_strategy(config.strategy).describe(), results,
                      transcripts, aggregate(results))
