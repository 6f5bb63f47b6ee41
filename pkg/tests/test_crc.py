import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flyprac.crc import (DEFAULT_CRC, CrcSpec, bit_syndromes, crc8, crc8_bitwise, crc8_bytes,
                         crc8_symbols, symbols_to_bits, verify, weight_distribution,
                         weight_distribution_dp, weight_distribution_exhaustive)

G = 0x1E7


def polymod_crc(bits):
    """Independent oracle: remainder of m(x) * x^8 modulo G(x) with Python integers."""
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    v <<= 8
    for shift in range(v.bit_length() - 9, -1, -1):
        if v >> (shift + 8) & 1:
            v ^= G << shift
    return v


def test_spec_validation():
    with pytest.raises(ValueError):
        CrcSpec(initial_value=0xFF)
    with pytest.raises(ValueError):
        CrcSpec(final_xor=1)
    with pytest.raises(ValueError):
        CrcSpec(divisor=0)
    assert DEFAULT_CRC.generator == G


def test_bitwise_and_table_match_oracle(rng):
    for n in list(range(1, 20)) + [64, 333]:
        bits = rng.integers(0, 2, n)
        ref = polymod_crc(bits)
        assert crc8_bitwise(bits) == ref
        assert crc8(bits) == ref


def test_bytes_path_matches_bits(rng):
    for n in (1, 2, 17, 100, 900, 5000):
        data = rng.integers(0, 256, n, dtype=np.uint8)
        assert crc8_bytes(data.tobytes()) == crc8(np.unpackbits(data))


def test_single_byte_checks():
    assert crc8_bytes(b"\x00") == 0
    assert crc8_bytes(b"\x01") == 0xE7  # x^8 mod G
    assert crc8_bytes(b"") == 0


@settings(max_examples=100, deadline=None)
@given(st.binary(min_size=1, max_size=64), st.binary(min_size=1, max_size=64))
def test_linearity(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    x = bytes(i ^ j for i, j in zip(a, b))
    assert crc8_bytes(x) == crc8_bytes(a) ^ crc8_bytes(b)


def test_syndromes_are_unit_crcs():
    n = 40
    syn = bit_syndromes(n)
    for i in range(n):
        e = np.zeros(n, dtype=np.uint8)
        e[i] = 1
        assert syn[i] == polymod_crc(e)


def test_generator_period_is_255():
    syn = bit_syndromes(600)
    # shifting a single error by the period leaves its syndrome unchanged
    assert all(syn[i] == syn[i + 255] for i in range(600 - 255))
    assert len(set(syn[:255].tolist())) == 255


def test_symbols_and_verify(rng):
    sym = rng.integers(0, 2, 23).astype(np.uint8)
    assert np.array_equal(symbols_to_bits(sym, 1), sym)
    assert crc8_symbols(sym, 1) == crc8(sym)
    b = rng.integers(0, 256, 9, dtype=np.uint8)
    assert crc8_symbols(b, 8) == crc8(np.unpackbits(b))
    assert verify(sym, crc8(sym))
    assert not verify(sym, crc8(sym) ^ 1)


def brute_weights(n_p):
    k = n_p - 8
    counts = [0] * (n_p + 1)
    for m in range(1 << k):
        bits = [(m >> (k - 1 - i)) & 1 for i in range(k)]
        counts[sum(bits) + bin(polymod_crc(bits)).count("1")] += 1
    return tuple(counts)


@pytest.mark.parametrize("n_p", [9, 10, 12, 15, 17])
def test_weight_distribution_brute_force(n_p):
    assert weight_distribution(n_p).counts == brute_weights(n_p)


@pytest.mark.parametrize("n_p", range(9, 33))
def test_dp_agrees_with_exhaustive(n_p):
    assert weight_distribution_dp(n_p).counts == weight_distribution_exhaustive(n_p).counts


def test_frozen_distribution_n15():
    wd = weight_distribution(15)
    assert wd.counts == (1, 0, 0, 0, 6, 14, 15, 25, 28, 21, 13, 3, 1, 1, 0, 0)
    assert wd.total == 2 ** 7
    assert wd.min_distance() == 4


def test_frozen_distribution_other_lengths():
    assert weight_distribution(23)[4] == 29
    assert weight_distribution(23).min_distance() == 4
    assert weight_distribution(30)[3] == 3
    assert weight_distribution(40).total == 2 ** 32  # DP path


def test_weight_distribution_rejects_short():
    with pytest.raises(ValueError):
        weight_distribution(8)
