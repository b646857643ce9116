import copy

import numpy as np
import pytest

from qkdake.quantum import NoCloningViolation, intercept_resend, measure, prepare


def test_same_basis_reads_bits():
    frame = prepare("0101", "1100")
    assert measure(frame, "0101", np.random.default_rng(0)) == "1100"


def test_frame_is_consume_once():
    frame = prepare("01", "10")
    measure(frame, "01", np.random.default_rng(0))
    with pytest.raises(NoCloningViolation):
        measure(frame, "01", np.random.default_rng(0))


def test_frames_cannot_be_copied():
    frame = prepare("01", "10")
    with pytest.raises(NoCloningViolation):
        copy.copy(frame)
    with pytest.raises(NoCloningViolation):
        copy.deepcopy(frame)


def test_length_mismatch():
    with pytest.raises(ValueError):
        measure(prepare("01", "10"), "0", np.random.default_rng(0))
    with pytest.raises(ValueError):
        prepare("01", "1")


def test_wrong_basis_is_a_fair_coin():
    n = 20000
    rng = np.random.default_rng(1)
    out = measure(prepare("0" * n, "0" * n), "1" * n, rng)
    assert abs(out.count("1") / n - 0.5) < 0.02


def test_intercept_consumes_input():
    frame = prepare("01", "10")
    intercept_resend(frame, 1.0, np.random.default_rng(0))
    with pytest.raises(NoCloningViolation):
        intercept_resend(frame, 1.0, np.random.default_rng(0))


def test_intercept_zero_fraction_is_transparent():
    rng = np.random.default_rng(2)
    bases, data = "0110" * 8, "1010" * 8
    fresh, record = intercept_resend(prepare(bases, data), 0.0, rng)
    assert record.entries == []
    assert measure(fresh, bases, rng) == data


def test_full_intercept_error_rate_on_sifted_positions():
    rng = np.random.default_rng(3)
    n = 40000
    b_a = "".join(rng.choice(["0", "1"], n))
    d = "".join(rng.choice(["0", "1"], n))
    b_b = "".join(rng.choice(["0", "1"], n))
    frame, record = intercept_resend(prepare(b_a, d), 1.0, rng)
    got = measure(frame, b_b, rng)
    same = [i for i in range(n) if b_a[i] == b_b[i]]
    err = sum(got[i] != d[i] for i in same) / len(same)
    assert len(record.entries) == n
    assert abs(err - 0.25) < 0.015


def test_eve_learns_bit_when_basis_matches():
    rng = np.random.default_rng(4)
    d = "1" * 64
    _, record = intercept_resend(prepare("0" * 64, d), 1.0, rng)
    assert all(o == 1 for _, basis, o in record.entries if basis == 0)
