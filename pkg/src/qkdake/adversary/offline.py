"""Offline analysis of a finished transcript by an unbounded adversary.

The "unbounded machine" is realized by exhaustive enumeration: every
assignment of the initiator's key bits consistent with the public transcript
(bases, check indices, reconciliation hash value) and with whatever the
adversary measured or was revealed is listed, pushed through the public
permutation and amplification hash, and the induced distribution over final
keys is compared with uniform. Check positions are disjoint from key
positions, so the disclosed check bits carry no information about the key.

Hash evaluation here is vectorized and written independently of
:mod:`qkdake.infotheory`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import infotheory as it
from ..auth import BreakableScheme, BruteForceFailure, SignatureScheme, brute_force_key
from ..bb84 import sift, split_check_key
from ..quantum import EveRecord
from ..wire import BASES, CHECK, RECON, ClassicalMessage

MAX_ENUM_BITS = 20


class EnumerationBudgetExceeded(Exception):
    pass


@dataclass
class OfflineStats:
    n3: int
    enumerated_bits: int
    known_bits: int
    consistent: int
    r_len: int
    s_len: int
    tv_distance: float
    best_guess: float
    delta: float

    def to_json(self) -> dict:
        return asdict(self)


def recompute_key(data_bits: str, msgs: dict[str, ClassicalMessage]) -> str | None:
    """The initiator's final key, given its data bits and the public messages."""
    try:
        bases, check, recon = msgs[BASES], msgs[CHECK], msgs[RECON]
    except KeyError:
        return None
    sifted = sift(check.get("b_A"), bases.get("b_B"), data_bits)
    _, key = split_check_key(sifted, check.get("ind"))
    pa = it.PaParams(it.Permutation(tuple(recon.get("P"))), it.HashParams.from_fields(recon.get("G")))
    return it.privacy_amplify(key, pa)


def _mult_shift(fields, x: np.ndarray, n: int) -> np.ndarray:
    # x holds n-bit keys; widen to w by appending zero bits
    a, b, w, out_len = (int(v) for v in fields)
    return ((a * (x << (w - n)) + b) % (1 << w)) >> (w - out_len)


def offline_analyze(msgs: dict[str, ClassicalMessage], eve_records: list[EveRecord],
                    revealed: dict | None = None, max_bits: int = MAX_ENUM_BITS) -> OfflineStats:
    """Distance from uniform of the initiator's key, as seen after the game.

    ``msgs`` are the transcript messages of the target run keyed by tag;
    ``revealed`` may carry the initiator's data bits under ``"data"``.
    """
    revealed = revealed or {}
    if RECON not in msgs:
        return OfflineStats(0, 0, 0, 0, 0, 0, 0.0, 1.0, 0.0)
    b_a = msgs[CHECK].get("b_A")
    b_b = msgs[BASES].get("b_B")
    ind = msgs[CHECK].get("ind")
    recon = msgs[RECON]
    sifted_pos = [i for i, (x, y) in enumerate(zip(b_a, b_b)) if x == y]
    key_pos = [p for p, flag in zip(sifted_pos, ind) if flag == "0"]
    n3 = len(key_pos)

    known: dict[int, int] = {}
    for record in eve_records:
        for pos, basis, outcome in record.entries:
            if basis == int(b_a[pos]):
                known[pos] = outcome
    if "data" in revealed:
        known.update({i: int(c) for i, c in enumerate(revealed["data"])})

    free = [j for j, p in enumerate(key_pos) if p not in known]
    if len(free) > max_bits:
        raise EnumerationBudgetExceeded(f"{len(free)} unknown key bits exceed {max_bits}")

    base = 0
    for j, p in enumerate(key_pos):
        if p in known:
            base |= known[p] << (n3 - 1 - j)
    cand = np.arange(1 << len(free), dtype=np.int64)
    x = np.full(cand.shape, base, dtype=np.int64)
    for idx, j in enumerate(free):
        x |= ((cand >> (len(free) - 1 - idx)) & 1) << (n3 - 1 - j)

    f_val = int(recon.get("F_val"), 2) if recon.get("F_val") else 0
    x = x[_mult_shift(recon.get("F"), x, n3) == f_val]

    y = np.zeros_like(x)
    for i, src in enumerate(recon.get("P")):
        y |= ((x >> (n3 - 1 - src)) & 1) << (n3 - 1 - i)
    g_fields = recon.get("G")
    s_len = int(g_fields[3])
    z = _mult_shift(g_fields, y, n3)
    probs = np.bincount(z, minlength=1 << s_len) / len(z)
    uniform = 2.0 ** -s_len
    r_len = int(recon.get("F")[3])
    return OfflineStats(
        n3=n3, enumerated_bits=len(free), known_bits=n3 - len(free), consistent=int(len(x)),
        r_len=r_len, s_len=s_len,
        tv_distance=float(0.5 * np.abs(probs - uniform).sum()),
        best_guess=float(probs.max()),
        delta=it.security_delta(n3, r_len, s_len))


def break_signatures(scheme: SignatureScheme, public_keys: dict[str, str],
                     messages: list[ClassicalMessage]) -> dict[str, int]:
    """Recover every signer's key from the signed traffic (breakable scheme only)."""
    if not isinstance(scheme, BreakableScheme):
        return {}
    observed: dict[str, list] = {}
    for msg in messages:
        if msg.signature:
            observed.setdefault(msg.sender, []).append((msg.signed_bytes(), msg.signature))
    keys = {}
    for pid, obs in sorted(observed.items()):
        try:
            keys[pid] = brute_force_key(scheme, public_keys[pid], obs[:2])
        except BruteForceFailure:
            continue
    return keys
