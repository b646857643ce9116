"""Scenario catalog, configuration handling and report emission."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import infotheory as it
from .adversary.game import GameConfig, GameResult, run_game
from .bb84 import Bb84Config
from .bits import from_int, random_bits, xor

OUT_DIR_ENV = "QKDAKE_OUT_DIR"
OVERRIDE_KEYS = ("n1", "trials", "seed", "fraction", "sig", "threshold")


class UnknownScenario(KeyError):
    pass


class InvalidOverride(ValueError):
    pass


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class Scenario:
    name: str
    summary: str
    defaults: dict
    runner: Callable[[dict], tuple[dict, list[Assertion], list[str]]]
    accepts: tuple[str, ...] = ("trials", "seed")


@dataclass
class Report:
    scenario: str
    version: str
    seed: int
    config: dict
    aggregates: dict
    assertions: list[Assertion]
    trials: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def to_json(self, timing: bool = True) -> dict:
        d = {"scenario": self.scenario, "version": self.version, "seed": self.seed,
             "config": self.config, "aggregates": self.aggregates,
             "assertions": [a.to_json() for a in self.assertions],
             "passed": self.passed, "trials": self.trials}
        if timing:
            d["timing"] = self.timing
        return d

    def dumps(self, timing: bool = True) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True)


def _check(name, value, lo=None, hi=None, equal=None) -> Assertion:
    if value is None:
        return Assertion(name, False, "no data")
    if equal is not None:
        return Assertion(name, value == equal, f"{value} == {equal}")
    ok = (lo is None or value >= lo) and (hi is None or value <= hi)
    return Assertion(name, ok, f"{value} in [{lo}, {hi}]")


def _game(params: dict, strategy: str, **extra) -> GameResult:
    bb = Bb84Config(n1=params["n1"], abort_threshold=params.get("threshold", it.ABORT_THRESHOLD))
    cfg = GameConfig(strategy=strategy, trials=params["trials"], seed=params["seed"],
                     sig_scheme=params.get("sig", "ideal"), bb84=bb, **extra)
    return run_game(cfg)


def _game_payload(result: GameResult) -> tuple[dict, list, list[str]]:
    lines = [line for t in result.transcripts for line in t]
    return result.aggregates, [t.to_json() for t in result.trials], lines


# scenario bodies; each returns (aggregates, assertions, transcript lines, trial rows)

def _honest(p):
    res = _game(p, "passive_relay")
    agg, rows, lines = _game_payload(res)
    checks = [
        _check("completion_rate", agg["completion_rate"], equal=1.0),
        _check("correctness_rate", agg["correctness_rate"], equal=1.0),
        _check("abort_rate", agg["abort_rate"], equal=0.0),
        _check("sifting_ratio", agg["mean_sifting_ratio"], 0.47, 0.53),
        _check("passive_advantage_within_4sigma", agg["advantage_fresh"]["within_4sigma"], equal=True),
    ]
    return agg, checks, lines, rows


def _intercept(p):
    res = _game(p, f"intercept_resend:{p['fraction']}")
    agg, rows, lines = _game_payload(res)
    f = p["fraction"]
    expected = f / 4
    lo, hi = (0.23, 0.27) if f == 1.0 else (expected - 0.01, expected + 0.01)
    checks = [_check("mean_eps", agg["mean_eps"], lo, hi)]
    if expected > p.get("threshold", it.ABORT_THRESHOLD) + 0.03:
        checks.append(_check("abort_rate", agg["abort_rate"], 0.99, 1.0))
    return agg, checks, lines, rows


def _mitm_ideal(p):
    res = _game(p, "mitm_forger:none")
    agg, rows, lines = _game_payload(res)
    checks = [_check("forged_accepted_total", agg["forged_accepted_total"], equal=0),
              _check("adversary_distinct_keys_rate", agg["adversary_distinct_keys_rate"], equal=0.0)]
    return agg, checks, lines, rows


def _mitm_broken(p):
    res = _game(p, "mitm_forger:pre")
    agg, rows, lines = _game_payload(res)
    checks = [_check("adversary_distinct_keys_rate", agg["adversary_distinct_keys_rate"], 0.99, 1.0),
              _check("fresh_rate", agg["fresh_rate"], equal=0.0)]
    return agg, checks, lines, rows


# expected freshness of the initiator's session for each reveal cell
REVEAL_GRID = [
    ("static", "pre", False), ("basis", "pre", False), ("data", "pre", False),
    ("ir", "pre", False), ("pa", "pre", False),
    ("static", "post", True), ("basis", "post", True), ("data", "post", False),
    ("ir", "post", True), ("pa", "post", True),
    ("own-static", "pre", True),
]


def _reveal_matrix(p):
    cells, checks, lines, rows = {}, [], [], []
    for i, (target, when, fresh) in enumerate(REVEAL_GRID):
        sub = dict(p, seed=p["seed"] + i)
        res = _game(sub, f"randomness_reveal:{target}:{when}")
        agg = res.aggregates
        key = f"{target}:{when}"
        cells[key] = {"expected_fresh": fresh, "fresh_rate": agg["fresh_rate"],
                      "completion_rate": agg["completion_rate"],
                      "advantage_fresh": agg["advantage_fresh"],
                      "advantage_not_fresh": agg["advantage_not_fresh"]}
        checks.append(_check(f"fresh[{key}]", agg["fresh_rate"], equal=1.0 if fresh else 0.0))
        lines += [json.dumps(dict(json.loads(ln), cell=key), sort_keys=True)
                  for t in res.transcripts for ln in t]
        rows += [dict(t.to_json(), cell=key) for t in res.trials]
    return {"cells": cells}, checks, lines, rows


def _longterm(p):
    res = _game(p, "passive_relay", offline=True, keyspace=p.get("keyspace", 1 << 16))
    agg, rows, lines = _game_payload(res)
    margins, n3s, broken = [], [], []
    for t in res.trials:
        if t.offline and "tv_distance" in t.offline:
            o = t.offline
            margins.append(o["tv_distance"] - (min(1.0, o["delta"]) + 0.05))
            n3s.append(o["n3"])
        if t.broken_keys is not None:
            broken.append(t.broken_keys)
    agg = dict(agg, offline_worst_margin=max(margins) if margins else None,
               offline_max_n3=max(n3s) if n3s else None,
               signature_keys_broken_min=min(broken) if broken else None)
    checks = [
        _check("offline_trials", len(margins), equal=len(res.trials)),
        _check("max_n3", agg["offline_max_n3"], hi=20),
        _check("tv_minus_bound", agg["offline_worst_margin"], hi=0.0),
        _check("signature_keys_broken", agg["signature_keys_broken_min"], lo=2),
    ]
    return agg, checks, lines, rows


def _universality(p):
    prof = it.collision_profile(p["w"], p["out_len"])
    checks = [Assertion("collision_le_weak_bound", prof["holds_weak"],
                        f"{prof['max_collision']} <= {prof['bound_weak']}")]
    agg = dict(prof, strong_bound_note="recorded only; not asserted")
    return agg, checks, [], []


def reconcile_trials(n3: int, eps: float, trials: int, seed: int, max_weight: int | None = None,
                     weight_cap: int = 2) -> dict:
    """Inject low-weight errors into random keys and count recoveries."""
    rng = np.random.default_rng(seed)
    r = it.ir_output_len(n3, eps)
    radius = max_weight if max_weight is not None else it.default_max_weight(n3)
    recovered = wrong = failed = 0
    by_weight: dict[int, list[int]] = {}
    for i in range(trials):
        k_a = random_bits(rng, n3)
        weight = i % (weight_cap + 1)
        pos = rng.choice(n3, size=weight, replace=False)
        mask = sum(1 << (n3 - 1 - int(j)) for j in pos)
        k_b = xor(k_a, from_int(mask, n3))
        f = it.sample_hash(it.padded_width(n3), r, rng)
        try:
            got = it.reconcile(k_b, f, it.hash_eval(f, k_a), radius)
        except it.NoCandidate:
            got = None
        tally = by_weight.setdefault(weight, [0, 0, 0])
        if got == k_a:
            recovered += 1
            tally[0] += 1
        elif got is None:
            failed += 1
            tally[2] += 1
        else:
            wrong += 1
            tally[1] += 1
    return {"n3": n3, "eps": eps, "r": r, "radius": radius, "trials": trials,
            "recovery_rate": recovered / trials, "false_correction_rate": wrong / trials,
            "failure_rate": failed / trials,
            "by_weight": {str(k): {"recovered": v[0], "wrong": v[1], "failed": v[2]}
                          for k, v in sorted(by_weight.items())}}


def _reconcile(p):
    agg = reconcile_trials(p["n3"], p["threshold"], p["trials"], p["seed"])
    checks = [_check("recovery_rate", agg["recovery_rate"], 0.99, 1.0),
              _check("false_correction_rate", agg["false_correction_rate"], 0.0, 0.01)]
    return agg, checks, [], []


_GAME_KEYS = ("trials", "seed", "n1", "sig", "threshold")

CATALOG: dict[str, Scenario] = {s.name: s for s in [
    Scenario("honest-baseline", "Passive relay between two honest parties; every run must agree on the key.",
             {"n1": 512, "trials": 1000, "seed": 0}, _honest, _GAME_KEYS),
    Scenario("intercept-full", "Eve measures and resends every qubit; expect about 25% errors and aborts.",
             {"n1": 1024, "trials": 200, "seed": 0, "fraction": 1.0}, _intercept,
             _GAME_KEYS + ("fraction",)),
    Scenario("intercept-partial", "Eve touches a fraction of qubits; the error rate scales as fraction/4.",
             {"n1": 1024, "trials": 200, "seed": 0, "fraction": 0.2}, _intercept,
             _GAME_KEYS + ("fraction",)),
    Scenario("mitm-ideal", "Man in the middle with ideal signatures and no key compromise.",
             {"n1": 256, "trials": 1000, "seed": 0}, _mitm_ideal, _GAME_KEYS),
    Scenario("mitm-broken-auth", "Man in the middle after partnering both signing keys.",
             {"n1": 256, "trials": 100, "seed": 0}, _mitm_broken, _GAME_KEYS),
    Scenario("reveal-matrix", "Partner on each randomness class before or after the run; freshness grid.",
             {"n1": 256, "trials": 20, "seed": 0}, _reveal_matrix, _GAME_KEYS),
    Scenario("longterm-offline", "Passive run, breakable signatures, exhaustive offline key enumeration.",
             {"n1": 48, "trials": 20, "seed": 0, "sig": "breakable"}, _longterm, _GAME_KEYS),
    Scenario("universality-exhaustive", "Exact collision profile of the multiply-shift family.",
             {"w": 8, "out_len": 3, "seed": 0}, _universality, ("seed",)),
    Scenario("reconcile-sweep", "Hash-and-search reconciliation against injected errors of weight <= 2.",
             {"n3": 24, "trials": 1000, "seed": 0, "threshold": it.ABORT_THRESHOLD}, _reconcile,
             ("trials", "seed", "threshold")),
]}


def list_scenarios() -> list[str]:
    return list(CATALOG)


def get_scenario(name: str) -> Scenario:
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(CATALOG)}") from None


def explain(name: str) -> str:
    s = get_scenario(name)
    lines = [f"{s.name}: {s.summary}", "defaults:"]
    lines += [f"  {k} = {v}" for k, v in s.defaults.items()]
    lines.append("accepted overrides: " + ", ".join(s.accepts))
    return "\n".join(lines)


def _validate(key, value):
    if key in ("n1", "trials") and (not isinstance(value, int) or value < 1):
        raise InvalidOverride(f"{key} must be a positive integer")
    if key == "seed" and (not isinstance(value, int) or value < 0):
        raise InvalidOverride("seed must be a non-negative integer")
    if key == "fraction" and not (0.0 <= float(value) <= 1.0):
        raise InvalidOverride("fraction must lie in [0, 1]")
    if key == "threshold" and not (0.0 <= float(value) <= 0.5):
        raise InvalidOverride("threshold must lie in [0, 0.5]")
    if key == "sig" and value not in ("ideal", "breakable"):
        raise InvalidOverride("sig must be ideal or breakable")


def resolve_params(scenario: Scenario, overrides: dict | None = None,
                   config_file: dict | None = None) -> dict:
    """Merge built-in defaults < config file < explicit overrides."""
    params = dict(scenario.defaults)
    for layer in (config_file or {}, overrides or {}):
        for key, value in layer.items():
            if value is None:
                continue
            if key not in OVERRIDE_KEYS:
                raise InvalidOverride(f"unknown setting {key!r}")
            if key not in scenario.accepts:
                raise InvalidOverride(f"{scenario.name} does not take {key!r}")
            _validate(key, value)
            params[key] = value
    return params


def default_out_dir() -> Path | None:
    d = os.environ.get(OUT_DIR_ENV)
    return Path(d) if d else None


def run_scenario(name: str, overrides: dict | None = None, out: str | Path | None = None,
                 dump: str | Path | None = None, config_file: dict | None = None,
                 csv_path: str | Path | None = None) -> Report:
    scenario = get_scenario(name)
    params = resolve_params(scenario, overrides, config_file)
    started = time.perf_counter()
    agg, checks, lines, rows = scenario.runner(params)
    elapsed = time.perf_counter() - started
    report = Report(scenario=name, version=__version__, seed=params.get("seed", 0), config=params,
                    aggregates=agg, assertions=checks, trials=rows,
                    timing={"elapsed_s": round(elapsed, 3)})

    if out is None and default_out_dir() is not None:
        out = default_out_dir() / f"{name}.json"
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.dumps() + "\n")
    if dump is not None:
        Path(dump).write_text("".join(line + "\n" for line in lines))
    if csv_path is not None:
        write_csv(report, csv_path)
    return report


def _flatten(d: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            flat[key] = json.dumps(v)
        else:
            flat[key] = v
    return flat


def write_csv(report: Report, path: str | Path) -> None:
    row = {"scenario": report.scenario, "seed": report.seed, "passed": report.passed}
    row.update(_flatten(report.aggregates))
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)


def load_config(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise InvalidOverride("config file must hold a JSON object")
    return data
