"""Bit-string helpers.

Bit strings are plain ``str`` objects over the alphabet ``"01"``, most
significant bit first. That keeps them hashable, comparable and trivially
serializable into transcripts.
"""

from __future__ import annotations

import numpy as np


def random_bits(rng: np.random.Generator, n: int) -> str:
    if n < 0:
        raise ValueError(f"negative bit count {n}")
    if n == 0:
        return ""
    return "".join("1" if v else "0" for v in rng.integers(0, 2, size=n))


def check_bits(s: str, name: str = "bits") -> str:
    if any(c not in "01" for c in s):
        raise ValueError(f"{name} is not a bit string: {s!r}")
    return s


def to_int(s: str) -> int:
    return int(s, 2) if s else 0


def from_int(value: int, width: int) -> str:
    if width == 0:
        return ""
    if value < 0 or value >= 1 << width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return format(value, f"0{width}b")


def xor(a: str, b: str) -> str:
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


def hamming(a: str, b: str) -> int:
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return sum(x != y for x, y in zip(a, b))


def to_hex(s: str) -> str:
    """Hex encoding of a bit string, MSB first, left-padded to whole nibbles."""
    if not s:
        return ""
    width = -(-len(s) // 4)
    return format(to_int(s), f"0{width}x")
