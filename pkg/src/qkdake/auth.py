"""Signature stand-ins: an ideal ledger scheme and a brute-forceable one.

Both schemes keep a per-world directory from verify key to signing key and
record every signature they issue, tagged with who asked for it. A
verification that succeeds for a (verify key, message) pair with no honest
signing record is counted as an accepted forgery -- the event that breaks
the authenticity argument for the classical channel.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field

import numpy as np

IDEAL = "ideal"
BREAKABLE = "breakable"


class SignatureError(Exception):
    pass


class NotAuthorized(SignatureError):
    """Signing with a key the caller neither owns nor partners."""


class NotBreakable(SignatureError):
    pass


class BruteForceFailure(SignatureError):
    pass


@dataclass(frozen=True)
class SigKeyPair:
    signing_key: object
    verify_key: str
    scheme: str


@dataclass(frozen=True)
class LedgerEntry:
    verify_key: str
    message: bytes
    tag: str
    origin: str  # "honest" | "adversary"


@dataclass
class SignatureLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def record(self, entry: LedgerEntry) -> None:
        self.entries.append(entry)

    def contains(self, verify_key: str, message: bytes, tag: str | None = None) -> bool:
        return any(e.verify_key == verify_key and e.message == message
                   and (tag is None or e.tag == tag) for e in self.entries)

    def honestly_signed(self, verify_key: str, message: bytes) -> bool:
        return any(e.verify_key == verify_key and e.message == message
                   and e.origin == "honest" for e in self.entries)


class SignatureScheme:
    name = ""
    tag_hex_len = 32

    def __init__(self):
        self.ledger = SignatureLedger()
        self.directory: dict[str, object] = {}
        self.forged_accepted = 0
        self.verifications = 0
        self._count = 0

    def keygen(self, owner: str, rng: np.random.Generator) -> SigKeyPair:
        self._count += 1
        vk = f"pk:{owner}:{self.name}:{self._count}"
        sk = self._draw_key(rng)
        self.directory[vk] = sk
        return SigKeyPair(sk, vk, self.name)

    def _draw_key(self, rng):
        raise NotImplementedError

    def _tag(self, signing_key, msg: bytes) -> str:
        raise NotImplementedError

    def sign(self, verify_key: str, signing_key, msg: bytes, origin: str = "honest") -> str:
        if self.directory.get(verify_key) != signing_key:
            raise NotAuthorized(f"caller does not hold the signing key for {verify_key}")
        tag = self._tag(signing_key, msg)
        self.ledger.record(LedgerEntry(verify_key, msg, tag, origin))
        return tag

    def _accepts(self, verify_key: str, msg: bytes, tag: str) -> bool:
        raise NotImplementedError

    def verify(self, verify_key: str, msg: bytes, tag: str) -> bool:
        self.verifications += 1
        ok = verify_key in self.directory and self._accepts(verify_key, msg, tag)
        if ok and not self.ledger.honestly_signed(verify_key, msg):
            self.forged_accepted += 1
        return ok


class IdealScheme(SignatureScheme):
    """Unforgeable by construction: only ledgered signatures verify."""

    name = IDEAL

    def _draw_key(self, rng):
        return rng.bytes(16).hex()

    def _tag(self, signing_key, msg):
        return hmac.new(bytes.fromhex(signing_key), msg, hashlib.sha256).hexdigest()[:self.tag_hex_len]

    def _accepts(self, verify_key, msg, tag):
        return self.ledger.contains(verify_key, msg, tag)


class BreakableScheme(SignatureScheme):
    """Deterministic tags keyed by a small integer key, recomputed on verify."""

    name = BREAKABLE
    tag_hex_len = 16

    def __init__(self, keyspace: int = 1 << 16):
        super().__init__()
        if keyspace < 2:
            raise ValueError("keyspace must hold at least two keys")
        self.keyspace = keyspace

    def _draw_key(self, rng):
        return int(rng.integers(0, self.keyspace))

    def _tag(self, signing_key, msg):
        return breakable_tag(signing_key, msg, self.tag_hex_len)

    def _accepts(self, verify_key, msg, tag):
        return hmac.compare_digest(self._tag(self.directory[verify_key], msg), tag)


def breakable_tag(key: int, msg: bytes, hex_len: int = 16) -> str:
    return hashlib.sha256(key.to_bytes(8, "big") + msg).hexdigest()[:hex_len]


def make_scheme(name: str, keyspace: int = 1 << 16) -> SignatureScheme:
    if name == IDEAL:
        return IdealScheme()
    if name == BREAKABLE:
        return BreakableScheme(keyspace)
    raise ValueError(f"unknown signature scheme {name!r}")


def brute_force_key(scheme: SignatureScheme, verify_key: str,
                    observed: list[tuple[bytes, str]]) -> int:
    """Search the whole keyspace for a key reproducing every observed tag."""
    if not isinstance(scheme, BreakableScheme):
        raise NotBreakable(f"{scheme.name} signatures cannot be brute-forced")
    if not observed:
        raise ValueError("at least one (message, signature) observation is required")
    for key in range(scheme.keyspace):
        if all(breakable_tag(key, msg, scheme.tag_hex_len) == tag for msg, tag in observed):
            return key
    raise BruteForceFailure(f"no key in a space of {scheme.keyspace} matches {verify_key}")
