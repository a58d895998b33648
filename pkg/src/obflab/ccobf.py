"""Compute-and-compare obfuscation: hash-locked comparators with sealed guts.

CC[f, y] returns 1 on x iff f(x) = y; the multi-bit variant releases a
payload z instead of 1.  The obfuscation stores no y and no z in the
clear: a random 16-byte salt keys a lock = PRF_salt(y), and z travels as
pad = z xor KDF_salt(y), recoverable exactly when evaluation produces
the matching y.  The function f itself lives behind a capability handle
(an 8-byte id resolved inside the sealed registry), so obfuscation bytes
expose sizes and nothing else; for f = Dec_sk the secret key never
leaves the seal.

This is a correctness-exact stand-in for a lattice-based CC obfuscator:
the distinguishing attack consumes only the interface (evaluate + the
simulator's shape), and the lock construction gives the cheap necessary
condition that the target is never stored recoverably.  sim_cc emits a
dummy with a uniformly random lock and a freshly keyed sealed decryptor,
byte-layout identical to the real thing.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import fhe as F
from . import prf as P
from .errors import AuthenticationError, KeyMismatchError
from .fhe import FheParams, RandomTape, SecretKey

SALT_BYTES = 16
LOCK_BYTES = 16
CAP_ID_BYTES = 8

_CAPS: dict = {}
_CAP_LOCK = threading.Lock()


@dataclass(frozen=True)
class CCParams:
    """Public metadata; carries no key- or target-dependent bytes."""

    in_len: int
    out_len: int
    lam: int

    def __post_init__(self):
        if not (0 < self.in_len <= 0xFFFF and 0 < self.out_len <= 0xFFFF):
            raise ValueError("lengths must fit in 16 bits")
        if not 1 <= self.lam <= 255:
            raise ValueError("lam must fit in a byte")

    def to_bytes(self) -> bytes:
        return (
            self.in_len.to_bytes(2, "big")
            + self.out_len.to_bytes(2, "big")
            + bytes([self.lam])
        )

    @staticmethod
    def from_bytes(data: bytes) -> "CCParams":
        if len(data) != 5:
            raise ValueError("params are 5 bytes")
        return CCParams(
            int.from_bytes(data[:2], "big"), int.from_bytes(data[2:4], "big"), data[4]
        )


@dataclass(frozen=True)
class SealedFunction:
    """Capability handle for an evaluator whose internals stay sealed."""

    cap_id: bytes
    in_len: int
    out_len: int

    def __post_init__(self):
        if len(self.cap_id) != CAP_ID_BYTES:
            raise ValueError("capability id must be 8 bytes")

    def call(self, bits):
        """f(bits), or None when the sealed computation rejects the input."""
        with _CAP_LOCK:
            fn = _CAPS.get(self.cap_id)
        if fn is None:
            raise KeyMismatchError("capability unknown to the sealed registry")
        return fn(bits)


def seal_function(tag: bytes, fingerprint: bytes, fn, in_len: int, out_len: int) -> SealedFunction:
    """Register fn under a deterministic capability id.

    The id is a one-way digest of (tag, fingerprint): reproducible across
    runs for the same sealed content, revealing nothing about it.
    """
    cap_id = P.prf_hash(b"capability/" + tag + b"/" + fingerprint, CAP_ID_BYTES)
    with _CAP_LOCK:
        _CAPS[cap_id] = fn
    return SealedFunction(cap_id, in_len, out_len)


def dec_capability(sk: SecretKey, lam: int) -> SealedFunction:
    """f = Dec_sk over serialized ciphertext bytes, sk held inside the seal."""

    def fn(bits):
        try:
            cts = F.cts_from_bytes(P.bits_to_bytes(list(bits)))
            if len(cts) != lam:
                return None
            return tuple(F.dec(sk, cts))
        except (AuthenticationError, KeyMismatchError, ValueError):
            return None

    return seal_function(b"dec", sk.to_bytes(), fn, lam * F.CT_BYTES * 8, lam)


@dataclass(frozen=True)
class CCObfuscation:
    salt: bytes
    lock: bytes
    pad: tuple  # z xor KDF(salt, y); empty for the single-bit variant
    cap: SealedFunction
    params: CCParams

    def __post_init__(self):
        if len(self.salt) != SALT_BYTES or len(self.lock) != LOCK_BYTES:
            raise ValueError("malformed salt or lock")
        if (self.cap.in_len, self.cap.out_len) != (self.params.in_len, self.params.out_len):
            raise ValueError("capability sizes disagree with params")

    @property
    def out_width(self) -> int:
        return len(self.pad) if self.pad else 1

    def to_bytes(self) -> bytes:
        return (
            self.salt
            + self.lock
            + len(self.pad).to_bytes(2, "big")
            + (P.bits_to_bytes(list(self.pad)) if self.pad else b"")
            + self.cap.cap_id
            + self.params.to_bytes()
        )


def cc_from_bytes(data: bytes) -> CCObfuscation:
    if len(data) < SALT_BYTES + LOCK_BYTES + 2 + CAP_ID_BYTES + 5:
        raise ValueError("truncated obfuscation")
    salt = data[:16]
    lock = data[16:32]
    n_pad = int.from_bytes(data[32:34], "big")
    pad_bytes = (n_pad + 7) // 8
    body = data[34:]
    if len(body) != pad_bytes + CAP_ID_BYTES + 5:
        raise ValueError("obfuscation length disagrees with its pad count")
    pad = tuple(P.bytes_to_bits(body[:pad_bytes], n_pad)) if n_pad else ()
    cap_id = body[pad_bytes : pad_bytes + CAP_ID_BYTES]
    params = CCParams.from_bytes(body[pad_bytes + CAP_ID_BYTES :])
    return CCObfuscation(salt, lock, pad, SealedFunction(cap_id, params.in_len, params.out_len), params)


def _lock_of(salt: bytes, y) -> bytes:
    ctx = b"cc-lock/" + len(y).to_bytes(2, "big") + P.bits_to_bytes(list(y))
    return P.prf(salt, ctx, LOCK_BYTES)


def _kdf(salt: bytes, y, n_bits: int) -> list:
    ctx = b"cc-kdf/" + len(y).to_bytes(2, "big") + P.bits_to_bytes(list(y))
    return P.bytes_to_bits(P.prf(salt, ctx, (n_bits + 7) // 8), n_bits)


def obf_cc(f: SealedFunction, y, z=None, lam: int | None = None, rng=None) -> CCObfuscation:
    """Obfuscate CC[f, y] (or MBCC[f, y, z] when z is given)."""
    y = tuple(int(b) for b in y)
    if len(y) != f.out_len:
        raise ValueError("target length must equal the evaluator's output length")
    rng = np.random.default_rng() if rng is None else rng
    salt = bytes(int(b) for b in rng.integers(0, 256, size=SALT_BYTES))
    pad = ()
    if z is not None:
        z = tuple(int(b) for b in z)
        if not z:
            raise ValueError("payload must be non-empty when given")
        pad = tuple(zb ^ kb for zb, kb in zip(z, _kdf(salt, y, len(z))))
    params = CCParams(f.in_len, f.out_len, len(y) if lam is None else lam)
    return CCObfuscation(salt, _lock_of(salt, y), pad, f, params)


def eval_obf(o: CCObfuscation, x) -> tuple:
    """CC semantics exactly: z (or 1) iff f(x) hits the locked target."""
    x = tuple(int(b) for b in x)
    if len(x) != o.params.in_len:
        raise ValueError("input length disagrees with params")
    y = o.cap.call(x)
    if y is not None and _lock_of(o.salt, y) == o.lock:
        if not o.pad:
            return (1,)
        return tuple(pb ^ kb for pb, kb in zip(o.pad, _kdf(o.salt, y, len(o.pad))))
    return (0,) * o.out_width


def sim_cc(lam: int, params: CCParams, pad_bits: int = 0, rng=None) -> CCObfuscation:
    """Lemma-2-shaped dummy from public metadata alone.

    Uniform lock (matches anything with probability 2^-128 per query),
    uniform salt and pad, and a sealed evaluator that is a freshly keyed
    decryption when the sizes say "decryptor", else a sealed reject-all.
    Byte layout identical to a real obfuscation with the same params.
    """
    rng = np.random.default_rng() if rng is None else rng
    salt = bytes(int(b) for b in rng.integers(0, 256, size=SALT_BYTES))
    lock = bytes(int(b) for b in rng.integers(0, 256, size=LOCK_BYTES))
    pad = tuple(int(b) for b in rng.integers(0, 2, size=pad_bits)) if pad_bits else ()
    if params.in_len == params.out_len * F.CT_BYTES * 8 and 4 <= params.out_len <= 128:
        kp = F.keygen(FheParams(params.out_len, 0), RandomTape.random(params.out_len, rng))
        cap = dec_capability(kp.sk, params.out_len)
    else:
        fresh = bytes(int(b) for b in rng.integers(0, 256, size=16))
        cap = seal_function(b"reject", fresh, lambda bits: None, params.in_len, params.out_len)
    return CCObfuscation(salt, lock, pad, cap, params)
