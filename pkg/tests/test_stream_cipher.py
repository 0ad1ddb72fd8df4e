import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from keysec import SizeGuardError
from keysec import probcore as pc
from keysec import stream_cipher as sc


def ref_fibonacci(width, taps, seed, length):
    """Bit-serial register: s[t+w] = XOR of s[t+j] over tap coefficients c_j, j < w."""
    s = [(seed >> i) & 1 for i in range(width)]
    while len(s) < length:
        t = len(s) - width
        s.append(sum(s[t + j] for j in range(width) if (taps >> j) & 1) & 1)
    return s[:length]


def euler_phi(m):
    out, k = m, 2
    while k * k <= m:
        if m % k == 0:
            while m % k == 0:
                m //= k
            out -= out // k
        k += 1
    if m > 1:
        out -= out // m
    return out


X4 = sc.LfsrSpec(4, 0b11001)  # x^4 + x^3 + 1


def test_first_outputs_are_seed_bits():
    ks = sc.generate_keystream(X4, 0b1011, 4)
    assert ks.bits.tolist() == [1, 1, 0, 1]


def test_known_width4_stream():
    ks = sc.generate_keystream(X4, 1, 15)
    assert ks.bits.tolist() == ref_fibonacci(4, 0b11001, 1, 15)
    assert sc.least_period(sc.generate_keystream(X4, 1, 45).bits) == 15


@pytest.mark.parametrize("width", range(2, 11))
def test_primitive_counts_match_totient(width):
    specs = sc.primitive_specs(width)
    assert len(specs) == euler_phi((1 << width) - 1) // width
    assert all(sc.is_primitive(s) for s in specs)


def test_non_primitive_rejected():
    assert not sc.is_primitive(sc.LfsrSpec(4, 0b11111))  # x^4+x^3+x^2+x+1 has period 5


@given(st.integers(2, 10), st.data())
def test_vectorized_matches_bit_serial(width, data):
    spec = data.draw(st.sampled_from(sc.primitive_specs(width)))
    seed = data.draw(st.integers(1, (1 << width) - 1))
    got = sc.generate_keystream(spec, seed, 5 * width).bits.tolist()
    assert got == ref_fibonacci(width, spec.taps, seed, 5 * width)


@given(st.integers(2, 9), st.data())
def test_galois_form_obeys_same_recurrence(width, data):
    spec = data.draw(st.sampled_from(sc.primitive_specs(width, "galois")))
    seed = data.draw(st.integers(1, (1 << width) - 1))
    bits = sc.generate_keystream(spec, seed, 6 * width).bits.tolist()
    c = spec.taps
    for t in range(len(bits) - width):
        assert bits[t + width] == sum(bits[t + j] for j in range(width) if (c >> j) & 1) % 2
    assert sc.state_period(spec, seed) == spec.period_max


@given(st.integers(2, 10), st.data())
def test_keystream_is_linear_in_seed(width, data):
    spec = data.draw(st.sampled_from(sc.primitive_specs(width)))
    a = data.draw(st.integers(1, (1 << width) - 1))
    b = data.draw(st.integers(1, (1 << width) - 1))
    if a == b:
        return
    L = 3 * width
    sa, sb = (sc.generate_keystream(spec, s, L).bits for s in (a, b))
    assert np.array_equal(sa ^ sb, sc.generate_keystream(spec, a ^ b, L).bits)


def test_zero_seed_refused_by_default():
    with pytest.raises(ValueError):
        sc.generate_keystream(X4, 0, 8)
    assert not sc.generate_keystream(X4, 0, 8, allow_zero=True).bits.any()


def test_json_roundtrip():
    assert sc.LfsrSpec.from_json(X4.to_json()) == X4
    assert X4.to_json() == {"width": 4, "taps": "0x19"}
    with pytest.raises(ValueError):
        sc.LfsrSpec(4, 0b1001)


# -- raw security of runs ----------------------------------------------------------

@pytest.mark.parametrize("width", [3, 5, 8])
def test_run_guess_prob_values(width):
    spec = sc.primitive_specs(width)[-1]
    for r in range(1, width + 1):
        assert sc.run_guess_prob(spec, 2, r) == Fraction(1 << (width - r), (1 << width) - 1)
        assert sc.run_guess_prob(spec, 2, r, include_zero=True) == Fraction(1, 1 << r)


def test_window_distribution_is_uniform_on_nonzero():
    d = sc.keystream_distribution(X4, 4, exact=True, start=3)
    assert d.p[0] == 0
    assert all(x == Fraction(1, 15) for x in d.p[1:])
    assert pc.guess_prob_whole(d) == Fraction(1, 15)


def test_dense_guard():
    with pytest.raises(SizeGuardError):
        sc.keystream_distribution(X4, 21)


@pytest.mark.parametrize("width", [4, 7, 10])
def test_entropy_ceiling(width):
    spec = sc.primitive_specs(width)[0]
    r = sc.shannon_limit_check(spec, 4 * width)
    assert r["ceiling_holds"] and r["floor_holds"]
    assert r["entropy"] == pytest.approx(math.log2((1 << width) - 1), abs=1e-12)
    assert r["ceiling_gap"] == pytest.approx(r["zero_seed_gap"], abs=1e-12)
    z = sc.shannon_limit_check(spec, 4 * width, include_zero=True)
    assert z["entropy"] == pytest.approx(width, abs=1e-12)


def test_information_floor_at_long_stream():
    r = sc.shannon_limit_check(X4, 100)
    assert r["info_per_bit_floor"] == pytest.approx(0.96)
    assert r["info_per_bit"] >= 0.96


# -- known-plaintext attack --------------------------------------------------------

@given(st.integers(2, 10), st.data())
def test_kpa_matches_exhaustive(width, data):
    spec = data.draw(st.sampled_from(sc.primitive_specs(width)))
    seed = data.draw(st.integers(1, (1 << width) - 1))
    L = 4 * width
    ks = sc.generate_keystream(spec, seed, L)
    positions = data.draw(st.lists(st.integers(0, L - 1), min_size=0, max_size=2 * width, unique=True))
    kpa = sc.KpaInstance(tuple(positions), tuple(int(ks.bits[p]) for p in positions))
    sol = sc.kpa_recover_seed(spec, kpa)
    assert sol.consistent
    assert sol.seeds == sc.exhaustive_seed_search(spec, kpa)
    assert seed in sol.seeds


@given(st.integers(2, 10), st.data())
def test_consecutive_known_bits_leave_width_minus_m_dimensions(width, data):
    spec = data.draw(st.sampled_from(sc.primitive_specs(width)))
    m = data.draw(st.integers(0, width))
    start = data.draw(st.integers(0, 2 * width))
    ks = sc.generate_keystream(spec, data.draw(st.integers(1, (1 << width) - 1)), start + width)
    kpa = sc.KpaInstance.consecutive(ks, start, m)
    sol = sc.kpa_recover_seed(spec, kpa)
    assert sol.dimension == width - m
    zero_fits = not any(kpa.bits)  # the all-zero seed lies in the affine space but is excluded
    assert len(sol.seeds) == (1 << (width - m)) - zero_fits


def test_width_consecutive_bits_pin_the_seed():
    for spec in sc.primitive_specs(6):
        ks = sc.generate_keystream(spec, 0b101101, 30)
        sol = sc.kpa_recover_seed(spec, sc.KpaInstance.consecutive(ks, 9, 6))
        assert sol.unique and sol.seeds == (0b101101,)


def test_inconsistent_known_bits():
    # the first four bits equal the seed, and bit 4 is their feedback parity; contradict it
    bits = ref_fibonacci(4, 0b11001, 0b0110, 5)
    bits[4] ^= 1
    sol = sc.kpa_recover_seed(X4, sc.KpaInstance(tuple(range(5)), tuple(bits)))
    assert not sol.consistent and sol.seeds == ()
    assert sc.exhaustive_seed_search(X4, sc.KpaInstance(tuple(range(5)), tuple(bits))) == ()


def test_kpa_json_roundtrip():
    k = sc.KpaInstance((3, 1, 7), (1, 0, 1))
    assert sc.KpaInstance.from_json(k.to_json()) == k
    with pytest.raises(ValueError):
        sc.KpaInstance((1, 1), (0, 1))
