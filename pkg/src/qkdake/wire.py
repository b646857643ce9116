"""Classical message records and their canonical byte encoding.

Every field is written as a one-byte type code, a 4-byte big-endian length
and the content. Bit strings are packed MSB first behind a 4-byte bit count;
integers and floats use their shortest decimal text; integer lists are
comma-separated decimal. Signatures are computed over
``tag || sid_a || sid_b || payload fields || signer`` in this encoding.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .bits import check_bits, from_int, to_int

BIT_FIELDS = frozenset({"b_A", "b_B", "ind", "chk", "F_val"})
INT_LIST_FIELDS = frozenset({"F", "P", "G"})
FLOAT_FIELDS = frozenset({"eps"})

# message tags, named after the step whose activation sends them
START = "start"      # A -> B, opens the run
BASES = "bases"      # B -> A, measurement bases
CHECK = "check"      # A -> B, bases plus check sample
EPS = "eps"          # B -> A, estimated error rate
RECON = "recon"      # A -> B, hash and amplifier


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class ClassicalMessage:
    tag: str
    sender: str
    receiver: str
    sid_a: str
    sid_b: str
    fields: tuple[tuple[str, object], ...]
    signature: str = ""

    def get(self, name: str):
        for key, value in self.fields:
            if key == name:
                return value
        raise KeyError(name)

    def payload_bytes(self) -> bytes:
        return encode_fields(self.fields)

    def signed_bytes(self) -> bytes:
        return signing_input(self.tag, self.sid_a, self.sid_b, self.fields, self.sender)

    def with_signature(self, signature: str) -> "ClassicalMessage":
        return ClassicalMessage(self.tag, self.sender, self.receiver, self.sid_a,
                                self.sid_b, self.fields, signature)


def _chunk(code: bytes, body: bytes) -> bytes:
    return code + struct.pack(">I", len(body)) + body


def encode_value(name: str, value) -> bytes:
    if name in BIT_FIELDS:
        check_bits(value, name)
        nbytes = -(-len(value) // 8)
        packed = to_int(value + "0" * (8 * nbytes - len(value))).to_bytes(nbytes, "big") if value else b""
        return _chunk(b"B", struct.pack(">I", len(value)) + packed)
    if name in INT_LIST_FIELDS:
        return _chunk(b"L", ",".join(str(int(v)) for v in value).encode())
    if name in FLOAT_FIELDS:
        return _chunk(b"F", repr(float(value)).encode())
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise WireError(f"cannot encode field {name!r} of type {type(value).__name__}")
    if isinstance(value, int):
        return _chunk(b"I", str(value).encode())
    return _chunk(b"S", value.encode())


def encode_fields(fields) -> bytes:
    out = bytearray()
    for name, value in fields:
        name_bytes = name.encode()
        out += struct.pack(">H", len(name_bytes)) + name_bytes + encode_value(name, value)
    return bytes(out)


def decode_fields(data: bytes) -> tuple[tuple[str, object], ...]:
    fields = []
    pos = 0
    try:
        while pos < len(data):
            (nlen,) = struct.unpack_from(">H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode()
            pos += nlen
            code = data[pos:pos + 1]
            (blen,) = struct.unpack_from(">I", data, pos + 1)
            body = data[pos + 5:pos + 5 + blen]
            if len(body) != blen:
                raise WireError("truncated field")
            pos += 5 + blen
            if code == b"B":
                (nbits,) = struct.unpack_from(">I", body, 0)
                packed = body[4:]
                bits = from_int(int.from_bytes(packed, "big"), 8 * len(packed)) if packed else ""
                value = bits[:nbits]
            elif code == b"L":
                value = tuple(int(v) for v in body.decode().split(",")) if body else ()
            elif code == b"F":
                value = float(body.decode())
            elif code == b"I":
                value = int(body.decode())
            elif code == b"S":
                value = body.decode()
            else:
                raise WireError(f"unknown type code {code!r}")
            fields.append((name, value))
    except struct.error as exc:
        raise WireError("truncated record") from exc
    return tuple(fields)


def signing_input(tag: str, sid_a: str, sid_b: str, fields, signer: str) -> bytes:
    head = (("tag", tag), ("sid_a", sid_a), ("sid_b", sid_b))
    return encode_fields(head + tuple(fields) + (("signer", signer),))
