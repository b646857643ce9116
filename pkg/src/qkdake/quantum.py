"""Conjugate-coding qubits simulated as (basis, bit) pairs.

Basis 0 is the computational basis (|0>, |1>), basis 1 the diagonal basis
(|+>, |->). Measuring in the preparation basis returns the encoded bit;
measuring in the other basis returns a uniform bit and collapses the qubit.
Frames are consume-once: the public interface offers no way to measure a
qubit twice or to copy a frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import check_bits


class NoCloningViolation(Exception):
    """A frame was measured, resent or delivered after being consumed."""


@dataclass(eq=False)
class SimQubit:
    basis: int
    bit: int
    consumed: bool = False


@dataclass(eq=False)
class QubitFrame:
    qubits: list[SimQubit]
    origin: str
    consumed: bool = False

    def __len__(self) -> int:
        return len(self.qubits)

    def __copy__(self):
        raise NoCloningViolation("qubit frames cannot be copied")

    def __deepcopy__(self, memo):
        raise NoCloningViolation("qubit frames cannot be copied")

    def _consume(self) -> None:
        if self.consumed:
            raise NoCloningViolation("frame already consumed")
        self.consumed = True
        for q in self.qubits:
            q.consumed = True


@dataclass
class EveRecord:
    """Positions the adversary measured: (position, basis used, outcome)."""

    entries: list[tuple[int, int, int]] = field(default_factory=list)

    def to_json(self) -> list[list[int]]:
        return [list(e) for e in self.entries]


def prepare(basis_bits: str, data_bits: str, origin: str = "") -> QubitFrame:
    check_bits(basis_bits, "basis_bits")
    check_bits(data_bits, "data_bits")
    if len(basis_bits) != len(data_bits):
        raise ValueError("basis and data bit strings differ in length")
    if not basis_bits:
        raise ValueError("cannot prepare an empty frame")
    return QubitFrame([SimQubit(int(b), int(d)) for b, d in zip(basis_bits, data_bits)],
                      origin)


def _measure_one(q: SimQubit, basis: int, coin: int) -> int:
    outcome = q.bit if basis == q.basis else coin
    q.basis, q.bit = basis, outcome
    return outcome


def measure(frame: QubitFrame, basis_bits: str, rng: np.random.Generator) -> str:
    check_bits(basis_bits, "basis_bits")
    if len(basis_bits) != len(frame):
        raise ValueError("measurement basis length does not match frame")
    frame._consume()
    coins = rng.integers(0, 2, size=len(frame))
    return "".join(str(_measure_one(q, int(b), int(c)))
                   for q, b, c in zip(frame.qubits, basis_bits, coins))


def intercept_resend(frame: QubitFrame, fraction: float,
                     rng: np.random.Generator) -> tuple[QubitFrame, EveRecord]:
    """Measure each qubit with probability ``fraction`` in a random basis and resend."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction {fraction} outside [0, 1]")
    frame._consume()
    n = len(frame)
    touch = rng.random(n) < fraction
    bases = rng.integers(0, 2, size=n)
    coins = rng.integers(0, 2, size=n)
    record = EveRecord()
    out = []
    for i, q in enumerate(frame.qubits):
        if touch[i]:
            outcome = _measure_one(q, int(bases[i]), int(coins[i]))
            record.entries.append((i, int(bases[i]), outcome))
            out.append(SimQubit(int(bases[i]), outcome))
        else:
            out.append(SimQubit(q.basis, q.bit))
    return QubitFrame(out, frame.origin), record
