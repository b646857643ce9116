import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdake import infotheory as it
from qkdake.bits import from_int, random_bits, to_int, xor


def h_oracle(eps):
    mpmath.mp.dps = 30
    e = mpmath.mpf(eps)
    return float(-e * mpmath.log(e, 2) - (1 - e) * mpmath.log(1 - e, 2))


class TestEntropy:
    def test_endpoints(self):
        assert it.binary_entropy(0) == 0 and it.binary_entropy(1) == 0
        assert it.binary_entropy(0.5) == pytest.approx(1.0)

    def test_frozen_value(self):
        # 0.3314018216... from a 30-digit evaluation
        assert it.binary_entropy(0.061) == pytest.approx(0.3314018216, abs=1e-9)

    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.11, 0.2, 0.37])
    def test_against_mpmath(self, eps):
        assert it.binary_entropy(eps) == pytest.approx(h_oracle(eps), abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            it.binary_entropy(1.5)

    @settings(max_examples=1000)
    @given(st.floats(0, 1))
    def test_symmetric(self, eps):
        assert abs(it.binary_entropy(eps) - it.binary_entropy(1 - eps)) < 1e-12


class TestHash:
    def test_family_shape_w4(self):
        rng = np.random.default_rng(0)
        seen_a, seen_b = set(), set()
        for _ in range(200):
            p = it.sample_hash(4, 2, rng)
            seen_a.add(p.a)
            seen_b.add(p.b)
        assert seen_a <= set(range(1, 16, 2)) and len(seen_a) >= 2
        assert seen_b <= {0, 4, 8, 12}

    def test_odd_width_rejected(self):
        with pytest.raises(ValueError):
            it.sample_hash(3, 2, np.random.default_rng(0))

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            it.HashParams(w=4, out_len=2, a=4, b=0)
        with pytest.raises(ValueError):
            it.HashParams(w=4, out_len=2, a=3, b=2)

    def test_hand_examples(self):
        assert it.hash_eval(it.HashParams(4, 2, 5, 4), "0111") == "01"
        assert it.hash_eval(it.HashParams(4, 2, 15, 12), "1001") == "00"
        assert it.hash_eval(it.HashParams(4, 2, 1, 0), "0000") == "00"

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            it.hash_eval(it.HashParams(4, 2, 1, 0), "010")

    def test_fields_roundtrip(self):
        p = it.HashParams(8, 3, 77, 32)
        assert it.HashParams.from_fields(p.to_fields()) == p

    @given(st.integers(1, 5).map(lambda k: 2 * k), st.data())
    def test_output_in_range(self, w, data):
        out_len = data.draw(st.integers(1, w))
        p = it.sample_hash(w, out_len, np.random.default_rng(data.draw(st.integers(0, 2**32))))
        x = data.draw(st.integers(0, (1 << w) - 1))
        assert 0 <= p(x) < 1 << out_len


def collisions_oracle(w, r):
    """Plain loops over the family and all pairs; used only at small w."""
    family = [(a, i << (w // 2)) for a in range(1, 1 << w, 2) for i in range(1 << (w // 2))]
    worst = 0.0
    for x in range(1 << w):
        for y in range(x + 1, 1 << w):
            hits = sum(((a * x + b) % (1 << w)) >> (w - r) == ((a * y + b) % (1 << w)) >> (w - r)
                       for a, b in family)
            worst = max(worst, hits / len(family))
    return worst


@pytest.mark.parametrize("w,r", [(4, 1), (4, 2), (6, 2), (6, 3)])
def test_collision_profile_matches_loops(w, r):
    assert it.collision_profile(w, r)["max_collision"] == pytest.approx(collisions_oracle(w, r))


def test_collision_profile_w8():
    prof = it.collision_profile(8, 3)
    assert prof["holds_weak"]
    # measured, not assumed: 0.1875 exceeds 1/8
    assert prof["max_collision"] == pytest.approx(0.1875)
    assert not prof["holds_strong"]


class TestLengths:
    def test_ir_examples(self):
        assert it.ir_output_len(100, 0) == 11
        assert it.ir_output_len(100, 0.05) == 40
        assert it.ir_output_len(24, 0.061) == 17

    def test_pa_examples(self):
        assert it.pa_output_len(100, 0) == 93
        assert it.pa_output_len(100, 0.05) == 7
        assert it.pa_output_len(100, 0.2) == 0

    @given(st.integers(1, 2000), st.floats(0, 0.49))
    def test_lengths_against_formula(self, n3, eps):
        h = it.binary_entropy(eps)
        slack = math.ceil(math.log2(n3 + 1))
        assert it.ir_output_len(n3, eps) == min(n3, math.ceil(n3 * h) + slack + 4)
        assert it.pa_output_len(n3, eps) == max(0, n3 - math.ceil(3 * n3 * h) - slack)

    def test_default_max_weight(self):
        assert it.default_max_weight(24) == 4
        assert it.default_max_weight(100) == 14


def reconcile_oracle(k_b, f, f_val):
    """Every candidate key, ordered by (weight, flipped positions)."""
    n = len(k_b)
    cands = []
    for x in range(1 << n):
        cand = from_int(x, n)
        flips = tuple(i for i in range(n) if cand[i] != k_b[i])
        cands.append((len(flips), flips, cand))
    for _, _, cand in sorted(cands):
        if it.hash_eval(f, it.pad_to_width(cand, f.w)) == f_val:
            return cand
    return None


class TestReconcile:
    def test_zero_errors(self):
        rng = np.random.default_rng(0)
        k = random_bits(rng, 16)
        f = it.sample_hash(16, 8, rng)
        assert it.reconcile(k, f, it.hash_eval(f, k), 0) == k

    def test_one_flip_n8_full_width(self):
        rng = np.random.default_rng(5)
        k_a = random_bits(rng, 8)
        k_b = xor(k_a, "00010000")
        f = it.sample_hash(8, 8, rng)
        f_val = it.hash_eval(f, k_a)
        assert it.reconcile(k_b, f, f_val, 2) == k_a == reconcile_oracle(k_b, f, f_val)

    def test_radius_exhausted(self):
        k_a = "10110010"
        k_b = xor(k_a, "11100000")
        f = it.HashParams(8, 8, 1, 0)
        with pytest.raises(it.NoCandidate):
            it.reconcile(k_b, f, it.hash_eval(f, k_a), 2)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 2**32), st.data())
    def test_matches_enumeration(self, n, seed, data):
        rng = np.random.default_rng(seed)
        w = it.padded_width(n)
        f = it.sample_hash(w, data.draw(st.integers(1, n)), rng)
        k_a, k_b = random_bits(rng, n), random_bits(rng, n)
        f_val = it.hash_eval(f, it.pad_to_width(k_a, w))
        expected = reconcile_oracle(k_b, f, f_val)
        assert expected is not None  # k_a itself always matches
        assert it.reconcile(k_b, f, f_val, n) == expected


class TestAmplify:
    def test_identity_keeps_top_bits(self):
        pa = it.PaParams(it.Permutation(tuple(range(5))), it.HashParams(6, 2, 1, 0))
        assert it.privacy_amplify("10110", pa) == "10"

    def test_independent_recomputation(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            pa = it.PaParams(it.sample_permutation(6, rng), it.sample_hash(6, 3, rng))
            k = "010011"
            y = "".join(k[m] for m in pa.perm.mapping)
            expect = ((pa.hash.a * int(y, 2) + pa.hash.b) % 64) >> 3
            assert it.privacy_amplify(k, pa) == format(expect, "03b")

    @given(st.integers(1, 40), st.integers(0, 2**32))
    def test_output_length(self, n, seed):
        rng = np.random.default_rng(seed)
        s = max(1, it.pa_output_len(n, 0.0))
        pa = it.PaParams(it.sample_permutation(n, rng), it.sample_hash(it.padded_width(n), s, rng))
        assert len(it.privacy_amplify(random_bits(rng, n), pa)) == s

    def test_not_a_bijection(self):
        with pytest.raises(ValueError):
            it.Permutation((0, 0, 1))

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            it.PaParams(it.Permutation((0, 1, 2)), it.HashParams(6, 2, 1, 0))


class TestBounds:
    def test_delta_example(self):
        assert it.security_delta(100, 40, 7) == pytest.approx(3 * 2.0**-27)
        assert it.security_delta(100, 40, 7) == pytest.approx(2.2351741790771484e-08)

    def test_delta_zero_exponent(self):
        assert it.security_delta(10, 6, 5) == 3.0

    @given(st.integers(1, 500), st.integers(0, 50), st.integers(0, 50))
    def test_delta_decreasing_in_n3(self, n3, r, s):
        assert it.security_delta(n3 + 1, r, s) < it.security_delta(n3, r, s)

    def test_threshold(self):
        eps = it.solve_threshold()
        root = float(mpmath.findroot(lambda e: 1 - 3 * (-e * mpmath.log(e, 2) - (1 - e) * mpmath.log(1 - e, 2)), 0.06))
        assert abs(eps - root) < 1e-6
        assert 0.0612 <= eps <= 0.0616
        assert eps >= it.ABORT_THRESHOLD
        assert abs(3 * it.binary_entropy(eps) - 1) < 1e-5
