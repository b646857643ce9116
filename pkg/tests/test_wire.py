import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdake.wire import ClassicalMessage, WireError, decode_fields, encode_fields, signing_input

bits = st.text(alphabet="01", max_size=300)
ints = st.lists(st.integers(0, 2**70), max_size=20).map(tuple)


@given(bits, bits, ints, st.floats(0, 1), st.text(max_size=20), st.integers(-5, 10**9))
def test_roundtrip(b_a, ind, perm, eps, label, n):
    fields = (("b_A", b_a), ("ind", ind), ("P", perm), ("eps", eps), ("l_F", label), ("count", n))
    assert decode_fields(encode_fields(fields)) == fields


def test_bits_keep_length():
    fields = (("chk", "101"),)
    assert decode_fields(encode_fields(fields)) == fields
    assert decode_fields(encode_fields((("chk", ""),))) == (("chk", ""),)


def test_truncated():
    data = encode_fields((("b_A", "1011"),))
    with pytest.raises(WireError):
        decode_fields(data[:-1])


def test_unencodable():
    with pytest.raises(WireError):
        encode_fields((("blob", 1.5),))


def test_signature_binds_both_sids_and_signer():
    base = signing_input("check", "A#1", "B#1", (("ind", "01"),), "A")
    assert base != signing_input("check", "A#1", "B#2", (("ind", "01"),), "A")
    assert base != signing_input("check", "A#2", "B#1", (("ind", "01"),), "A")
    assert base != signing_input("check", "A#1", "B#1", (("ind", "01"),), "E")
    assert base != signing_input("eps", "A#1", "B#1", (("ind", "01"),), "A")


def test_message_accessors():
    msg = ClassicalMessage("eps", "B", "A", "A#1", "B#1", (("eps", 0.0),))
    assert msg.get("eps") == 0.0
    with pytest.raises(KeyError):
        msg.get("chk")
    assert msg.with_signature("ab").signed_bytes() == msg.signed_bytes()
