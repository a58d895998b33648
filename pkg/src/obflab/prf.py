"""Keyed hash / PRF used for every randomness derivation in the package.

Construction (fixed, documented; toy-grade by design):

* Core: the Chaskey permutation -- 8 rounds of ARX on a 128-bit state held
  as four little-endian 32-bit words.
* Keyed sponge in counter mode, rate 16 bytes::

      h   = P(key XOR le128(len(data)))
      h   = P(h XOR chunk)          for each 16-byte chunk of pad(data)
      h   = h XOR key
      out = P(h XOR le128(j))       for j = 0, 1, ...   (truncated to n)

  where pad(data) = data || 0x80 || 0x00... to a 16-byte multiple, and
  le128(v) is v as a 16-byte little-endian integer.

Keys are exactly 16 bytes.  Domain separation is done by callers through
short ASCII prefixes on `data`.  The same function exists in three forms
that are tested against each other: the scalar reference below, the numpy
batch form (`prf_blocks_many`), and a boolean-circuit mirror (built in
`builder.py`) so that key generation can be garbled gate by gate.

This primitive is part of the sealed-backend security fiction: it is not
claimed to resist a cryptanalyst, only to be a fixed, well-distributed,
deterministic function that fits in a desk-scale boolean circuit.
"""

from __future__ import annotations

import numpy as np

MASK32 = 0xFFFFFFFF

# Fixed 16-byte module keys ("sealed backend key material").  Reachable
# only through module APIs by convention; see README on the threat model.
KEY_ZERO = bytes(16)


def _rotl(v: int, r: int) -> int:
    return ((v << r) | (v >> (32 - r))) & MASK32


def chaskey_perm(state: tuple[int, int, int, int]) -> tuple[int, int, int, int]:
    """One application of the 8-round Chaskey permutation."""
    v0, v1, v2, v3 = state
    for _ in range(8):
        v0 = (v0 + v1) & MASK32
        v1 = _rotl(v1, 5) ^ v0
        v0 = _rotl(v0, 16)
        v2 = (v2 + v3) & MASK32
        v3 = _rotl(v3, 8) ^ v2
        v0 = (v0 + v3) & MASK32
        v3 = _rotl(v3, 13) ^ v0
        v2 = (v2 + v1) & MASK32
        v1 = _rotl(v1, 7) ^ v2
        v2 = _rotl(v2, 16)
    return v0, v1, v2, v3


def _to_words(b: bytes) -> tuple[int, int, int, int]:
    return (
        int.from_bytes(b[0:4], "little"),
        int.from_bytes(b[4:8], "little"),
        int.from_bytes(b[8:12], "little"),
        int.from_bytes(b[12:16], "little"),
    )


def _to_bytes(w: tuple[int, int, int, int]) -> bytes:
    return b"".join(x.to_bytes(4, "little") for x in w)


def _xor16(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def _le128(v: int) -> bytes:
    return v.to_bytes(16, "little")


def _pad(data: bytes) -> bytes:
    return data + b"\x80" + b"\x00" * (15 - (len(data) % 16))


def prf(key: bytes, data: bytes, n: int) -> bytes:
    """n pseudorandom bytes from (key, data).  key must be 16 bytes."""
    if len(key) != 16:
        raise ValueError("prf key must be exactly 16 bytes")
    h = _to_bytes(chaskey_perm(_to_words(_xor16(key, _le128(len(data))))))
    padded = _pad(data)
    for i in range(0, len(padded), 16):
        h = _to_bytes(chaskey_perm(_to_words(_xor16(h, padded[i : i + 16]))))
    h = _xor16(h, key)
    out = bytearray()
    for j in range((n + 15) // 16):
        out += _to_bytes(chaskey_perm(_to_words(_xor16(h, _le128(j)))))
    return bytes(out[:n])


def prf_hash(data: bytes, n: int = 16) -> bytes:
    """Unkeyed convenience hash: prf under the all-zero key."""
    return prf(KEY_ZERO, data, n)


def derive_key(parent: bytes, tag: bytes) -> bytes:
    """16-byte subkey from a 16-byte parent key and a domain tag."""
    return prf(parent, b"key/" + tag, 16)


# ---------------------------------------------------------------------------
# numpy batch form: many independent prf computations with equal data length.
# Used by the encryption layer when deriving pad streams for tens of
# thousands of bit ciphertexts at once.
# ---------------------------------------------------------------------------


def _rotl_np(v: np.ndarray, r: int) -> np.ndarray:
    return ((v << np.uint32(r)) | (v >> np.uint32(32 - r))) & np.uint32(MASK32)


def chaskey_perm_many(state: np.ndarray) -> np.ndarray:
    """Chaskey permutation on an (N, 4) uint32 array of states."""
    v0 = state[:, 0].copy()
    v1 = state[:, 1].copy()
    v2 = state[:, 2].copy()
    v3 = state[:, 3].copy()
    for _ in range(8):
        v0 += v1
        v1 = _rotl_np(v1, 5) ^ v0
        v0 = _rotl_np(v0, 16)
        v2 += v3
        v3 = _rotl_np(v3, 8) ^ v2
        v0 += v3
        v3 = _rotl_np(v3, 13) ^ v0
        v2 += v1
        v1 = _rotl_np(v1, 7) ^ v2
        v2 = _rotl_np(v2, 16)
    return np.stack([v0, v1, v2, v3], axis=1)


def _bytes_rows_to_words(rows: np.ndarray) -> np.ndarray:
    # rows: (N, 16) uint8 -> (N, 4) uint32, little-endian words
    return rows.reshape(-1, 4, 4).astype(np.uint32) @ np.uint32(
        [1, 1 << 8, 1 << 16, 1 << 24]
    )


def _words_to_bytes_rows(words: np.ndarray) -> np.ndarray:
    n = words.shape[0]
    out = np.empty((n, 16), dtype=np.uint8)
    for i in range(4):
        w = words[:, i]
        out[:, 4 * i + 0] = w & 0xFF
        out[:, 4 * i + 1] = (w >> 8) & 0xFF
        out[:, 4 * i + 2] = (w >> 16) & 0xFF
        out[:, 4 * i + 3] = (w >> 24) & 0xFF
    return out


def prf_blocks_many(key: bytes, datas: np.ndarray, n_blocks: int) -> np.ndarray:
    """Batch prf over N equal-length messages.

    datas: (N, L) uint8 with one message per row (L arbitrary, same for all
    rows).  Returns (N, n_blocks * 16) uint8: for each row the first
    n_blocks squeeze blocks of prf(key, row, ...).  Bit-identical to the
    scalar `prf` (verified by test).
    """
    if len(key) != 16:
        raise ValueError("prf key must be exactly 16 bytes")
    n, length = datas.shape
    key_row = np.frombuffer(key, dtype=np.uint8)
    init = np.frombuffer(_xor16(key, _le128(length)), dtype=np.uint8)
    h = chaskey_perm_many(_bytes_rows_to_words(np.tile(init, (n, 1))))
    pad_len = 16 * ((length + 16) // 16) - length
    padding = np.zeros((n, pad_len), dtype=np.uint8)
    padding[:, 0] = 0x80
    padded = np.concatenate([datas, padding], axis=1)
    for i in range(0, padded.shape[1], 16):
        chunk = _bytes_rows_to_words(np.ascontiguousarray(padded[:, i : i + 16]))
        h = chaskey_perm_many(h ^ chunk)
    h = h ^ _bytes_rows_to_words(np.tile(key_row, (n, 1)))
    out = np.empty((n, n_blocks * 16), dtype=np.uint8)
    for j in range(n_blocks):
        ctr = _bytes_rows_to_words(
            np.tile(np.frombuffer(_le128(j), dtype=np.uint8), (n, 1))
        )
        out[:, 16 * j : 16 * (j + 1)] = _words_to_bytes_rows(
            chaskey_perm_many(h ^ ctr)
        )
    return out


def prf_many(keys: np.ndarray, datas: np.ndarray, n_blocks: int) -> np.ndarray:
    """Batch prf with a different 16-byte key per row.

    keys: (N, 16) uint8, datas: (N, L) uint8, one message per row.
    Returns (N, n_blocks * 16) uint8, row i holding the first blocks of
    prf(keys[i], datas[i], ...).  Bit-identical to the scalar form.
    Garbling needs this shape: every table row is padded under its own
    wire-label key.
    """
    if keys.shape[1] != 16:
        raise ValueError("prf key must be exactly 16 bytes")
    n, length = datas.shape
    kw = _bytes_rows_to_words(np.ascontiguousarray(keys))
    lw = _bytes_rows_to_words(
        np.tile(np.frombuffer(_le128(length), dtype=np.uint8), (n, 1))
    )
    h = chaskey_perm_many(kw ^ lw)
    pad_len = 16 * ((length + 16) // 16) - length
    padding = np.zeros((n, pad_len), dtype=np.uint8)
    padding[:, 0] = 0x80
    padded = np.concatenate([datas, padding], axis=1)
    for i in range(0, padded.shape[1], 16):
        chunk = _bytes_rows_to_words(np.ascontiguousarray(padded[:, i : i + 16]))
        h = chaskey_perm_many(h ^ chunk)
    h = h ^ kw
    out = np.empty((n, n_blocks * 16), dtype=np.uint8)
    for j in range(n_blocks):
        ctr = _bytes_rows_to_words(
            np.tile(np.frombuffer(_le128(j), dtype=np.uint8), (n, 1))
        )
        out[:, 16 * j : 16 * (j + 1)] = _words_to_bytes_rows(
            chaskey_perm_many(h ^ ctr)
        )
    return out


# ---------------------------------------------------------------------------
# Bit packing conventions, shared package-wide:
#   * bit k of a stream lives in byte k // 8, position k % 8 (LSB-first);
#   * integers built from bit lists take bit 0 as the least significant.
# ---------------------------------------------------------------------------


def bits_to_bytes(bits) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for k, b in enumerate(bits):
        if b:
            out[k >> 3] |= 1 << (k & 7)
    return bytes(out)


def bytes_to_bits(data: bytes, n_bits: int | None = None) -> list[int]:
    if n_bits is None:
        n_bits = 8 * len(data)
    return [(data[k >> 3] >> (k & 7)) & 1 for k in range(n_bits)]


def int_to_bits(v: int, n_bits: int) -> list[int]:
    return [(v >> k) & 1 for k in range(n_bits)]


def bits_to_int(bits) -> int:
    v = 0
    for k, b in enumerate(bits):
        if b:
            v |= 1 << k
    return v
