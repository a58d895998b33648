"""Keyed hash: reference vectors, counter-mode structure, batch equality."""

import numpy as np
import pytest

from obflab import prf as P


def _perm_oracle(state):
    # Independent transliteration of the documented round, kept deliberately
    # separate from the implementation under test.
    m = 0xFFFFFFFF
    rl = lambda v, r: ((v << r) & m) | (v >> (32 - r))
    v0, v1, v2, v3 = state
    for _ in range(8):
        v0 = (v0 + v1) & m
        v1 = rl(v1, 5) ^ v0
        v0 = rl(v0, 16)
        v2 = (v2 + v3) & m
        v3 = rl(v3, 8) ^ v2
        v0 = (v0 + v3) & m
        v3 = rl(v3, 13) ^ v0
        v2 = (v2 + v1) & m
        v1 = rl(v1, 7) ^ v2
        v2 = rl(v2, 16)
    return (v0, v1, v2, v3)


def test_perm_matches_independent_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = tuple(int(x) for x in rng.integers(0, 2**32, size=4, dtype=np.uint64))
        assert P.chaskey_perm(s) == _perm_oracle(s)


def test_perm_is_a_permutation_on_samples():
    # distinct inputs -> distinct outputs (spot check, not a proof)
    rng = np.random.default_rng(8)
    seen = {}
    for _ in range(500):
        s = tuple(int(x) for x in rng.integers(0, 2**32, size=4, dtype=np.uint64))
        out = P.chaskey_perm(s)
        assert seen.setdefault(out, s) == s
    # the all-zero state is a fixed point of any ARX core; the sponge always
    # XORs in the length block first, so it is never fed a live zero state
    assert P.chaskey_perm((0, 0, 0, 0)) == (0, 0, 0, 0)


def test_prf_requires_16_byte_key():
    with pytest.raises(ValueError):
        P.prf(b"short", b"x", 16)


def test_prf_deterministic_and_length():
    key = bytes(range(16))
    a = P.prf(key, b"hello", 33)
    assert len(a) == 33
    assert a == P.prf(key, b"hello", 33)
    assert a != P.prf(key, b"hellp", 33)
    assert a != P.prf(bytes(16), b"hello", 33)


def test_prf_counter_mode_prefix_property():
    # Squeezing more output must extend, never change, earlier blocks.
    key = P.prf_hash(b"k", 16)
    long = P.prf(key, b"data", 80)
    for n in (1, 16, 17, 48, 79):
        assert P.prf(key, b"data", n) == long[:n]


def test_prf_length_extension_distinct():
    key = bytes(16)
    # messages that are prefixes of each other must not collide
    assert P.prf(key, b"", 16) != P.prf(key, b"\x00", 16)
    assert P.prf(key, b"ab", 16) != P.prf(key, b"ab\x80", 16)


def test_avalanche_rough():
    key = P.prf_hash(b"avalanche", 16)
    base = P.prf(key, b"message-0", 8)
    flips = []
    for i in range(1, 65):
        other = P.prf(key, b"message-%d" % i, 8)
        flips.append(bin(int.from_bytes(base, "little") ^ int.from_bytes(other, "little")).count("1"))
    mean = sum(flips) / len(flips)
    assert 22 < mean < 42  # ~32 expected over 64 bits


def test_batch_matches_scalar():
    rng = np.random.default_rng(9)
    key = P.prf_hash(b"batch", 16)
    for length in (0, 1, 14, 16, 17, 50):
        datas = rng.integers(0, 256, size=(40, length), dtype=np.uint8) if length else np.zeros((40, 0), np.uint8)
        out = P.prf_blocks_many(key, datas, 3)
        for row in range(40):
            want = P.prf(key, bytes(datas[row].tobytes()), 48)
            assert bytes(out[row].tobytes()) == want


def test_bit_packing_round_trips():
    rng = np.random.default_rng(10)
    for _ in range(50):
        n = int(rng.integers(1, 70))
        bits = [int(b) for b in rng.integers(0, 2, size=n)]
        assert P.bytes_to_bits(P.bits_to_bytes(bits), n) == bits
        v = P.bits_to_int(bits)
        assert P.int_to_bits(v, n) == bits
    assert P.bits_to_bytes([1, 0, 0, 0, 0, 0, 0, 0, 1]) == b"\x01\x01"
