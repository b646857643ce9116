"""Binary entropy, 2-universal hashing, reconciliation and privacy amplification.

The hash family is multiply-shift with a restricted additive term::

    H_{a,b}(x) = ((a*x + b) mod 2**w) div 2**(w - out_len)

with ``a`` odd in (0, 2**w) and ``b = i * 2**(w/2)``. Widths are kept even so
``w/2`` is integral; keys of odd length are zero-padded on the high side,
which leaves their integer value unchanged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bits import check_bits, from_int, to_int

ABORT_THRESHOLD = 0.061


class NoCandidate(Exception):
    """Reconciliation found no error pattern within the search radius."""


def binary_entropy(eps: float) -> float:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"binary entropy undefined at {eps}")
    if eps in (0.0, 1.0):
        return 0.0
    return -eps * math.log2(eps) - (1.0 - eps) * math.log2(1.0 - eps)


def padded_width(n: int) -> int:
    return n + (n % 2)


def pad_to_width(bits: str, w: int) -> str:
    if len(bits) > w:
        raise ValueError(f"{len(bits)} bits do not fit width {w}")
    # zeros go on the low side so the key's leading bits stay leading
    return bits + "0" * (w - len(bits))


def random_int_bits(rng: np.random.Generator, nbits: int) -> int:
    """Uniform integer in [0, 2**nbits), for widths beyond int64."""
    if nbits <= 0:
        return 0
    raw = int.from_bytes(rng.bytes(-(-nbits // 8)), "big")
    return raw >> (8 * -(-nbits // 8) - nbits)


@dataclass(frozen=True)
class HashParams:
    w: int
    out_len: int
    a: int
    b: int

    def __post_init__(self):
        if self.w < 2 or self.w % 2:
            raise ValueError(f"hash width must be even and >= 2, got {self.w}")
        # out_len == w is allowed: the map is then a bijection (perfect hash)
        if not 1 <= self.out_len <= self.w:
            raise ValueError(f"output width {self.out_len} invalid for w={self.w}")
        if self.a % 2 == 0 or not 0 < self.a < 1 << self.w:
            raise ValueError("multiplier must be odd and in (0, 2**w)")
        half = 1 << (self.w // 2)
        if self.b % half or not 0 <= self.b // half < half:
            raise ValueError("additive term must be i * 2**(w/2) with 0 <= i < 2**(w/2)")

    def __call__(self, x: int) -> int:
        return ((self.a * x + self.b) % (1 << self.w)) >> (self.w - self.out_len)

    def to_fields(self) -> list[int]:
        return [self.a, self.b, self.w, self.out_len]

    @classmethod
    def from_fields(cls, fields) -> "HashParams":
        a, b, w, out_len = (int(v) for v in fields)
        return cls(w=w, out_len=out_len, a=a, b=b)


def sample_hash(w: int, out_len: int, rng: np.random.Generator) -> HashParams:
    if w < 2 or w % 2:
        raise ValueError(f"hash width must be even and >= 2, got {w}")
    if not 1 <= out_len <= w:
        raise ValueError(f"output width {out_len} invalid for w={w}")
    a = (random_int_bits(rng, w - 1) << 1) | 1
    i = random_int_bits(rng, w // 2)
    return HashParams(w=w, out_len=out_len, a=a, b=i << (w // 2))


def hash_eval(params: HashParams, x: str) -> str:
    check_bits(x, "x")
    if len(x) != params.w:
        raise ValueError(f"input has {len(x)} bits, hash expects {params.w}")
    return from_int(params(to_int(x)), params.out_len)


def collision_profile(w: int, out_len: int) -> dict:
    """Exhaustive collision statistics of the whole family at width ``w``.

    Returns the maximum and mean, over input pairs x != y, of the fraction of
    family members under which x and y collide.
    """
    if w > 10:
        raise ValueError("exhaustive enumeration limited to w <= 10")
    xs = np.arange(1 << w, dtype=np.int64)
    half = 1 << (w // 2)
    a = np.arange(1, 1 << w, 2, dtype=np.int64)
    b = np.arange(half, dtype=np.int64) * half
    mult = (a[:, None] * xs[None, :]) % (1 << w)
    table = ((mult[:, None, :] + b[None, :, None]) % (1 << w)) >> (w - out_len)
    table = table.reshape(-1, 1 << w)
    family = table.shape[0]
    worst, total, pairs = 0.0, 0.0, 0
    for x in range(len(xs) - 1):
        frac = (table[:, x + 1:] == table[:, [x]]).sum(axis=0) / family
        worst = max(worst, float(frac.max()))
        total += float(frac.sum())
        pairs += frac.size
    return {"w": w, "out_len": out_len, "family_size": family, "pairs": pairs,
            "max_collision": worst, "mean_collision": total / pairs,
            "bound_weak": 2.0 ** (-out_len + 1), "bound_strong": 2.0 ** (-out_len),
            "holds_weak": worst <= 2.0 ** (-out_len + 1),
            "holds_strong": worst <= 2.0 ** (-out_len)}


def _log_slack(n3: int) -> int:
    return math.ceil(math.log2(n3 + 1))


def ir_output_len(n3: int, eps: float) -> int:
    """Length r' of the reconciliation hash: ceil(n3 h(eps)) + log slack + 4."""
    if n3 < 1:
        raise ValueError("n3 must be positive")
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"error rate {eps} outside [0, 0.5)")
    return min(n3, math.ceil(n3 * binary_entropy(eps)) + _log_slack(n3) + 4)


def pa_output_len(n3: int, eps: float) -> int:
    """Final key length s'; 0 means nothing can be extracted."""
    if n3 < 1:
        raise ValueError("n3 must be positive")
    shrink = math.ceil(3 * n3 * binary_entropy(min(max(eps, 0.0), 1.0)))
    return max(0, n3 - shrink - _log_slack(n3))


def default_max_weight(n3: int) -> int:
    return math.ceil(2 * ABORT_THRESHOLD * n3) + 1


def search_size(n3: int, max_weight: int) -> int:
    return sum(math.comb(n3, k) for k in range(min(max_weight, n3) + 1))


def max_weight_for_budget(n3: int, budget: int) -> int:
    """Largest radius whose full search visits at most ``budget`` candidates."""
    weight = 0
    while weight < n3 and search_size(n3, weight + 1) <= budget:
        weight += 1
    return weight


def reconcile(k_b: str, f: HashParams, f_val: str, max_weight: int) -> str:
    """Correct ``k_b`` to the key whose hash under ``f`` is ``f_val``.

    Error patterns are tried by increasing Hamming weight; within one weight,
    flipped-position tuples are visited in lexicographic order.
    """
    check_bits(k_b, "k_b")
    check_bits(f_val, "f_val")
    n3 = len(k_b)
    if f.w != padded_width(n3):
        raise ValueError(f"hash width {f.w} does not match key length {n3}")
    if len(f_val) != f.out_len:
        raise ValueError("hash value length does not match hash output width")
    target = to_int(f_val)
    base = to_int(k_b)
    shift = f.w - n3
    for weight in range(min(max_weight, n3) + 1):
        for positions in itertools.combinations(range(n3), weight):
            mask = 0
            for p in positions:
                mask |= 1 << (n3 - 1 - p)
            if f((base ^ mask) << shift) == target:
                return from_int(base ^ mask, n3)
    raise NoCandidate(f"no error pattern of weight <= {max_weight} matches")


@dataclass(frozen=True)
class Permutation:
    """Output position ``i`` takes input position ``mapping[i]``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError("mapping is not a bijection")

    def __len__(self) -> int:
        return len(self.mapping)

    def apply(self, bits: str) -> str:
        if len(bits) != len(self.mapping):
            raise ValueError("permutation size does not match input")
        return "".join(bits[m] for m in self.mapping)


def sample_permutation(n: int, rng: np.random.Generator) -> Permutation:
    return Permutation(tuple(int(i) for i in rng.permutation(n)))


@dataclass(frozen=True)
class PaParams:
    perm: Permutation
    hash: HashParams

    def __post_init__(self):
        if self.hash.w != padded_width(len(self.perm)):
            raise ValueError("hash width does not match permutation size")


def privacy_amplify(k: str, pa: PaParams) -> str:
    check_bits(k, "k")
    if len(k) != len(pa.perm):
        raise ValueError(f"key has {len(k)} bits, amplifier expects {len(pa.perm)}")
    return hash_eval(pa.hash, pad_to_width(pa.perm.apply(k), pa.hash.w))


def security_delta(n3: int, r: int, s: int) -> float:
    """Explicit term 3 * 2**(-(n3 - r - s + 1)/2) of the distance-from-uniform bound."""
    if n3 < 1:
        raise ValueError("n3 must be positive")
    return 3.0 * 2.0 ** (-(n3 - r - s + 1) / 2)


def solve_threshold(tol: float = 1e-6) -> float:
    """Error rate at which 1 - 3 h(eps) reaches zero, by bisection on (0, 0.5)."""
    lo, hi = 1e-12, 0.5
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if 1.0 - 3.0 * binary_entropy(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
