import time

import numpy as np
import pytest

from qkdake.auth import (BruteForceFailure, NotAuthorized, NotBreakable, breakable_tag,
                         brute_force_key, make_scheme)
from qkdake.model import STATIC, World


def keyed(name, **kw):
    scheme = make_scheme(name, **kw)
    return scheme, scheme.keygen("A", np.random.default_rng(0))


@pytest.mark.parametrize("name", ["ideal", "breakable"])
def test_roundtrip(name):
    scheme, kp = keyed(name)
    tag = scheme.sign(kp.verify_key, kp.signing_key, b"hello")
    assert scheme.verify(kp.verify_key, b"hello", tag)
    assert not scheme.verify(kp.verify_key, b"hellO", tag)
    assert scheme.forged_accepted == 0


@pytest.mark.parametrize("name", ["ideal", "breakable"])
def test_fixed_width_hex_tags(name):
    scheme, kp = keyed(name)
    tag = scheme.sign(kp.verify_key, kp.signing_key, b"m")
    assert len(tag) == scheme.tag_hex_len
    int(tag, 16)


def test_ideal_rejects_unledgered_tag():
    scheme, kp = keyed("ideal")
    real = scheme.sign(kp.verify_key, kp.signing_key, b"a")
    assert not scheme.verify(kp.verify_key, b"b", real)
    assert not scheme.verify(kp.verify_key, b"b", "0" * 32)


def test_wrong_key_not_authorized():
    scheme, kp = keyed("ideal")
    with pytest.raises(NotAuthorized):
        scheme.sign(kp.verify_key, "00" * 16, b"x")


def test_partnered_key_signs_and_counts_as_forgery():
    w = World(0)
    w.register_party("B")
    scheme = make_scheme("ideal")
    kp = scheme.keygen("B", w.rngs["B"])
    w.add_pair("B", "sig", kp.signing_key, STATIC, public_part=kp.verify_key)
    stolen = w.partner("B", kp.verify_key)
    tag = scheme.sign(kp.verify_key, stolen, b"evil", origin="adversary")
    assert scheme.verify(kp.verify_key, b"evil", tag)
    assert scheme.forged_accepted == 1


def test_unknown_scheme():
    with pytest.raises(ValueError):
        make_scheme("rsa")


class TestBruteForce:
    def test_recovers_key_fast(self):
        scheme, kp = keyed("breakable")
        obs = [(m, scheme.sign(kp.verify_key, kp.signing_key, m)) for m in (b"one", b"two")]
        t = time.perf_counter()
        key = brute_force_key(scheme, kp.verify_key, obs)
        assert time.perf_counter() - t < 1.0
        assert key == kp.signing_key

    def test_recovered_key_signs_future_messages(self):
        scheme, kp = keyed("breakable", keyspace=1 << 10)
        obs = [(b"x", scheme.sign(kp.verify_key, kp.signing_key, b"x"))]
        key = brute_force_key(scheme, kp.verify_key, obs)
        for m in (b"later", b"much later"):
            assert breakable_tag(key, m) == breakable_tag(kp.signing_key, m)

    def test_needs_observation(self):
        scheme, kp = keyed("breakable")
        with pytest.raises(ValueError):
            brute_force_key(scheme, kp.verify_key, [])

    def test_ideal_not_breakable(self):
        scheme, kp = keyed("ideal")
        with pytest.raises(NotBreakable):
            brute_force_key(scheme, kp.verify_key, [(b"m", "00")])

    def test_corrupted_input(self):
        scheme, kp = keyed("breakable", keyspace=64)
        with pytest.raises(BruteForceFailure):
            brute_force_key(scheme, kp.verify_key, [(b"m", "not-a-tag")])
