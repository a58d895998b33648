"""Leveled classical homomorphic encryption over an explicit random tape.

The scheme is a correctness-faithful reference backend, not a hardness
claim: a ciphertext is an authenticated PRF-masked encryption of one bit,
and eval() decrypts, evaluates the circuit in the clear, and re-encrypts
behind the module boundary.  Plaintext access exists only inside this
file; everything callers can observe (key bytes, ciphertext bytes, level
accounting, failure modes) behaves like a leveled FHE.  That boundary is
the laboratory's documented security fiction.

Key generation is deterministic in (lam, d, tape).  The tape seeds a key
chain: tape_i = PRF_tape(i) yields sub-secret sk_i and a nonce; each
level i >= 1 contributes a bridge block, the encryption of sk_{i-1}
under sk_i, and the public key is the byte concatenation

    pk = lam(1) || kid_0(8)  ||  [ kid_i(8) level(2) nonce(4) bits(4) tags(32) ] * d

so pk parses back into its generating blocks exactly.  The secret key is
always (sk_d, kid_d): 12 bytes, whatever d is.

Ciphertext serialization (one bit, 17 bytes):
    kid(8) || level(2, big-endian) || nonce(4) || idx(1) || body(1) || tag(1)
Bits are encrypted in groups of up to 128 sharing a nonce; body is the
PRF-masked plaintext bit and the one-byte tag commits to (key, nonce,
level, idx, body), so flipping any serialized byte fails authentication.

keygen_circuit() re-expresses key generation as a BooleanCircuit from
tape bits to pk bits, emitted level by level so that gate i is identical
for every depth bound that includes it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import prf as P
from .builder import CircuitBuilder
from .circuits import BooleanCircuit
from .errors import AuthenticationError, DepthExceededError, KeyMismatchError

SECRET_BYTES = 4
KID_BYTES = 8
CT_BYTES = 17
GROUP_BITS = 128
BLOCK0_BYTES = 1 + KID_BYTES
BLOCK_BYTES = KID_BYTES + 2 + 4 + 4 + 8 * SECRET_BYTES  # 50


@dataclass(frozen=True)
class FheParams:
    lam: int
    d: int

    def __post_init__(self):
        if not 4 <= self.lam <= 128:
            raise ValueError("lam must be in 4..128 (the tape seeds one PRF key)")
        if not 0 <= self.d <= 255:
            raise ValueError("depth bound must be in 0..255")


@dataclass(frozen=True)
class RandomTape:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits) or not 1 <= len(bits) <= 128:
            raise ValueError("tape must be 1..128 bits of 0/1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, lam: int, rng) -> "RandomTape":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=lam)))

    def key16(self) -> bytes:
        return P.bits_to_bytes(list(self.bits) + [0] * (128 - len(self.bits)))


@dataclass(frozen=True)
class PublicKey:
    params: FheParams
    key_bytes: bytes

    def __post_init__(self):
        want = BLOCK0_BYTES + self.params.d * BLOCK_BYTES
        if len(self.key_bytes) != want:
            raise ValueError(f"public key must be {want} bytes for d={self.params.d}")

    @property
    def kid(self) -> bytes:
        """Key id of the working (deepest) sub-key."""
        if self.params.d == 0:
            return self.key_bytes[1 : 1 + KID_BYTES]
        return self.key_bytes[-BLOCK_BYTES : -BLOCK_BYTES + KID_BYTES]


@dataclass(frozen=True)
class SecretKey:
    secret: bytes
    kid: bytes

    def __post_init__(self):
        if len(self.secret) != SECRET_BYTES or len(self.kid) != KID_BYTES:
            raise ValueError("malformed secret key")

    def to_bytes(self) -> bytes:
        return self.secret + self.kid


@dataclass(frozen=True)
class KeyPair:
    pk: PublicKey
    sk: SecretKey


@dataclass(frozen=True)
class Ciphertext:
    kid: bytes
    level: int
    nonce: bytes
    idx: int
    body: int
    tag: int

    def __post_init__(self):
        if len(self.kid) != KID_BYTES or len(self.nonce) != 4:
            raise ValueError("malformed ciphertext fields")
        if not (0 <= self.level <= 0xFFFF and 0 <= self.idx <= 0xFF):
            raise ValueError("level or index out of range")
        if not (0 <= self.body <= 0xFF and 0 <= self.tag <= 0xFF):
            raise ValueError("body and tag are single bytes")

    def to_bytes(self) -> bytes:
        return (
            self.kid
            + self.level.to_bytes(2, "big")
            + self.nonce
            + bytes([self.idx, self.body, self.tag])
        )


def ciphertext_from_bytes(data: bytes) -> Ciphertext:
    if len(data) != CT_BYTES:
        raise ValueError(f"ciphertext must be {CT_BYTES} bytes")
    return Ciphertext(
        data[:8], int.from_bytes(data[8:10], "big"), data[10:14], data[14], data[15], data[16]
    )


def cts_to_bytes(cts) -> bytes:
    return b"".join(ct.to_bytes() for ct in cts)


def cts_from_bytes(data: bytes) -> list[Ciphertext]:
    if len(data) % CT_BYTES:
        raise ValueError("dangling bytes after the last ciphertext")
    return [ciphertext_from_bytes(data[i : i + CT_BYTES]) for i in range(0, len(data), CT_BYTES)]


# ---------------------------------------------------------------------------
# Sealed backend internals.  The registry maps key ids to sub-secrets; it
# stands in for "being the FHE scheme" and never leaks through the API.
# ---------------------------------------------------------------------------

_REGISTRY: dict = {}
_REG_LOCK = threading.Lock()


def _register(kid: bytes, secret: bytes) -> None:
    with _REG_LOCK:
        _REGISTRY[kid] = secret


def _secret_for_kid(kid: bytes) -> bytes:
    with _REG_LOCK:
        secret = _REGISTRY.get(kid)
    if secret is None:
        raise KeyMismatchError("key id unknown to the sealed backend")
    return secret


def _key16(secret: bytes) -> bytes:
    return secret + bytes(16 - SECRET_BYTES)


def _tape(tape_key: bytes, i: int) -> bytes:
    return P.prf(tape_key, b"tape" + bytes([i]), 2 * SECRET_BYTES)


def _kid_of(secret: bytes) -> bytes:
    return P.prf(_key16(secret), b"kid", KID_BYTES)


def _stream_ctx(label: bytes, nonce: bytes, level: int) -> bytes:
    return label + nonce + level.to_bytes(2, "big")


def _mask_bits(secret: bytes, nonce: bytes, level: int, count: int) -> list[int]:
    raw = P.prf(_key16(secret), _stream_ctx(b"mask", nonce, level), (count + 7) // 8)
    return P.bytes_to_bits(raw, count)


def _tag_streams(secret: bytes, nonce: bytes, level: int, count: int):
    a = P.prf(_key16(secret), _stream_ctx(b"tagA", nonce, level), count)
    b = P.prf(_key16(secret), _stream_ctx(b"tagB", nonce, level), count)
    return a, b


def _encrypt_group(secret, kid, bits, level, nonce) -> list[Ciphertext]:
    mask = _mask_bits(secret, nonce, level, len(bits))
    tag_a, tag_b = _tag_streams(secret, nonce, level, len(bits))
    out = []
    for j, bit in enumerate(bits):
        body = bit ^ mask[j]
        out.append(Ciphertext(kid, level, nonce, j, body, (tag_b if body else tag_a)[j]))
    return out


def _encrypt_groups(secret, kid, bits, level, nonces) -> list[Ciphertext]:
    """_encrypt_group over consecutive GROUP_BITS chunks, one nonce each.

    Byte-identical to the per-group loop; the stream derivations collapse
    into three batched prf calls, which is what makes encrypting the tens
    of thousands of pad bits a quantum ciphertext needs tolerable.
    """
    bits = [int(b) for b in bits]
    n_groups = -(-len(bits) // GROUP_BITS)
    if len(nonces) != n_groups:
        raise ValueError("one nonce per group of bits required")
    if n_groups <= 2:
        out = []
        for g, nonce in enumerate(nonces):
            out += _encrypt_group(
                secret, kid, bits[g * GROUP_BITS : (g + 1) * GROUP_BITS], level, nonce
            )
        return out
    key = _key16(secret)

    def ctx(label, nonce):
        return np.frombuffer(_stream_ctx(label, nonce, level), dtype=np.uint8)

    mask_raw = P.prf_blocks_many(
        key, np.stack([ctx(b"mask", n) for n in nonces]), (GROUP_BITS + 127) // 128
    )
    tag_raw = P.prf_blocks_many(
        key,
        np.stack([ctx(lab, n) for n in nonces for lab in (b"tagA", b"tagB")]),
        (GROUP_BITS + 15) // 16,
    )
    k = len(bits)
    mask_flat = np.unpackbits(mask_raw, axis=1, bitorder="little").ravel()[:k]
    tag_a = tag_raw[0::2].ravel()[:k]
    tag_b = tag_raw[1::2].ravel()[:k]
    bodies = np.asarray(bits, dtype=np.uint8) ^ mask_flat
    tags = np.where(bodies.astype(bool), tag_b, tag_a)
    bodies = bodies.tolist()
    tags = tags.tolist()
    return [
        Ciphertext(kid, level, nonces[j // GROUP_BITS], j % GROUP_BITS, bodies[j], tags[j])
        for j in range(k)
    ]


def _derive_chain(lam: int, d: int, r: RandomTape):
    if len(r.bits) != lam:
        raise ValueError("tape length must equal lam")
    tape_key = r.key16()
    secrets, nonces = [], []
    for i in range(d + 1):
        t = _tape(tape_key, i)
        secrets.append(t[:SECRET_BYTES])
        nonces.append(t[SECRET_BYTES:])
    return secrets, nonces, [_kid_of(s) for s in secrets]


def _bridge_body(secret_i, kid_i, nonce_i, prev_secret) -> bytes:
    bits = P.bytes_to_bits(prev_secret)
    mask = _mask_bits(secret_i, nonce_i, 0, len(bits))
    tag_a, tag_b = _tag_streams(secret_i, nonce_i, 0, len(bits))
    masked = [b ^ m for b, m in zip(bits, mask)]
    tags = bytes((tag_b if mb else tag_a)[j] for j, mb in enumerate(masked))
    return kid_i + (0).to_bytes(2, "big") + nonce_i + P.bits_to_bytes(masked) + tags


def expand_bridge(body: bytes) -> list[Ciphertext]:
    """Bridge block body -> the per-bit ciphertexts it compresses."""
    if len(body) != BLOCK_BYTES:
        raise ValueError(f"bridge body must be {BLOCK_BYTES} bytes")
    kid, level = body[:8], int.from_bytes(body[8:10], "big")
    nonce = body[10:14]
    masked = P.bytes_to_bits(body[14:18])
    tags = body[18:]
    return [Ciphertext(kid, level, nonce, j, mb, tags[j]) for j, mb in enumerate(masked)]


# ---------------------------------------------------------------------------
# Public operations.
# ---------------------------------------------------------------------------


def keygen(params: FheParams, r: RandomTape) -> KeyPair:
    """Deterministic keypair from the tape; pk bytes are the block chain."""
    secrets, nonces, kids = _derive_chain(params.lam, params.d, r)
    for kid, secret in zip(kids, secrets):
        _register(kid, secret)
    body = bytes([params.lam]) + kids[0]
    for i in range(1, params.d + 1):
        body += _bridge_body(secrets[i], kids[i], nonces[i], secrets[i - 1])
    return KeyPair(PublicKey(params, body), SecretKey(secrets[-1], kids[-1]))


def _group_nonces(n_bits: int, rng) -> list[bytes]:
    return [
        bytes(int(x) for x in rng.integers(0, 256, size=4))
        for _ in range(-(-n_bits // GROUP_BITS))
    ]


def enc(pk: PublicKey, bits, rng=None) -> list[Ciphertext]:
    """Bit-by-bit randomized encryption at full level d."""
    rng = np.random.default_rng() if rng is None else rng
    secret = _secret_for_kid(pk.kid)
    bits = [int(b) for b in bits]
    return _encrypt_groups(secret, pk.kid, bits, pk.params.d, _group_nonces(len(bits), rng))


def _derive_streams_batch(secret: bytes, keys: list) -> dict:
    """(nonce, level) -> (mask bits, tagA bytes, tagB bytes) at GROUP_BITS
    width, all stream derivations fused into two batched prf calls."""
    key16 = _key16(secret)
    mask_ctx = np.stack(
        [np.frombuffer(_stream_ctx(b"mask", n, lv), dtype=np.uint8) for n, lv in keys]
    )
    tag_ctx = np.stack(
        [
            np.frombuffer(_stream_ctx(lab, n, lv), dtype=np.uint8)
            for n, lv in keys
            for lab in (b"tagA", b"tagB")
        ]
    )
    mask_raw = P.prf_blocks_many(key16, mask_ctx, (GROUP_BITS + 127) // 128)
    tag_raw = P.prf_blocks_many(key16, tag_ctx, (GROUP_BITS + 15) // 16)
    mask_bits = np.unpackbits(mask_raw, axis=1, bitorder="little")[:, :GROUP_BITS]
    return {
        k: (
            mask_bits[i].tolist(),
            tag_raw[2 * i, :GROUP_BITS].tobytes(),
            tag_raw[2 * i + 1, :GROUP_BITS].tobytes(),
            GROUP_BITS,
        )
        for i, k in enumerate(keys)
    }


def dec(sk: SecretKey, cts) -> list[int]:
    """Bit-by-bit decryption; authenticates every ciphertext."""
    cts = list(cts)
    streams: dict = {}
    if len(cts) >= 8:
        # batch-derive the streams every in-range ciphertext will want;
        # oversized idx values fall back to the lazy path below
        wanted = []
        for ct in cts:
            k = (ct.nonce, ct.level)
            if ct.idx < GROUP_BITS and k not in streams:
                streams[k] = None
                wanted.append(k)
        streams = _derive_streams_batch(sk.secret, wanted) if wanted else {}
    bits = []
    for ct in cts:
        if ct.kid != sk.kid:
            raise KeyMismatchError("ciphertext was made under a different key")
        key = (ct.nonce, ct.level)
        if key not in streams or streams[key][3] <= ct.idx:
            count = max(ct.idx + 1, GROUP_BITS)
            mask = _mask_bits(sk.secret, ct.nonce, ct.level, count)
            tag_a, tag_b = _tag_streams(sk.secret, ct.nonce, ct.level, count)
            streams[key] = (mask, tag_a, tag_b, count)
        mask, tag_a, tag_b, _ = streams[key]
        if ct.body not in (0, 1):
            raise AuthenticationError("ciphertext body is not a masked bit")
        want = (tag_b if ct.body else tag_a)[ct.idx]
        if ct.tag != want:
            raise AuthenticationError("ciphertext failed authentication")
        bits.append(ct.body ^ mask[ct.idx])
    return bits


def eval_circuit(pk: PublicKey, circuit: BooleanCircuit, cts, rng=None) -> list[Ciphertext]:
    """Homomorphic evaluation: outputs decrypt to circuit(plaintexts) and
    carry level = (minimum input level) - depth(circuit)."""
    cts = list(cts)
    if len(cts) != circuit.n_inputs:
        raise ValueError("ciphertext count must match circuit inputs")
    floor_level = min((ct.level for ct in cts), default=pk.params.d)
    need = circuit.depth()
    if need > floor_level:
        raise DepthExceededError(f"depth {need} exceeds remaining budget {floor_level}")
    secret = _secret_for_kid(pk.kid)
    plain = dec(SecretKey(secret, pk.kid), cts)  # sealed boundary: internal only
    out_bits = circuit.eval(plain)
    rng = np.random.default_rng() if rng is None else rng
    level = floor_level - need
    return _encrypt_groups(
        secret, pk.kid, out_bits, level, _group_nonces(len(out_bits), rng)
    )


# ---------------------------------------------------------------------------
# Key generation as a boolean circuit.
#
# Mirrors keygen() bit for bit: inputs are the lam tape bits, outputs are
# the pk bits in serialization order.  Levels are emitted in order and no
# gate references anything from a later level, so the circuit for depth
# d is a gate-list prefix of the circuit for depth d' > d.  That prefix
# property is what lets per-gate key blocks be generated without knowing
# the final depth bound.
# ---------------------------------------------------------------------------

_KC_CACHE: dict = {}
_KC_LOCK = threading.Lock()


def keygen_circuit(lam: int, d: int) -> BooleanCircuit:
    with _KC_LOCK:
        circ = _KC_CACHE.get((lam, d))
    if circ is None:
        circ = _build_keygen_circuit(lam, d)
        with _KC_LOCK:
            _KC_CACHE[(lam, d)] = circ
    return circ


def _prf_key_wires(b: CircuitBuilder, secret_wires) -> list[int]:
    return list(secret_wires) + [b.cached_const(0)] * (128 - len(secret_wires))


def _build_keygen_circuit(lam: int, d: int) -> BooleanCircuit:
    b = CircuitBuilder(lam)
    tape_key = _prf_key_wires(b, b.inputs())
    outputs: list[int] = []

    def stream(secret_wires, label: bytes, nonce_wires, n_out: int) -> list[int]:
        data = b.const_bytes(label) + list(nonce_wires) + b.const_bytes(bytes(2))
        return b.prf_v(_prf_key_wires(b, secret_wires), data, n_out)

    prev_secret = None
    for i in range(d + 1):
        tape = b.prf_v(tape_key, b.const_bytes(b"tape" + bytes([i])), 2 * SECRET_BYTES)
        secret = tape[: 8 * SECRET_BYTES]
        nonce = tape[8 * SECRET_BYTES :]
        kid = b.prf_v(_prf_key_wires(b, secret), b.const_bytes(b"kid"), KID_BYTES)
        if i == 0:
            outputs += b.const_bytes(bytes([lam])) + kid
        else:
            mask = stream(secret, b"mask", nonce, SECRET_BYTES)
            tag_a = stream(secret, b"tagA", nonce, 8 * SECRET_BYTES)
            tag_b = stream(secret, b"tagB", nonce, 8 * SECRET_BYTES)
            masked = b.xor_v(prev_secret, mask)
            tags = []
            for j, mb in enumerate(masked):
                tags += [b.mux(mb, tag_b[8 * j + k], tag_a[8 * j + k]) for k in range(8)]
            outputs += kid + b.const_bytes(bytes(2)) + nonce + masked + tags
        prev_secret = secret
    return b.finish(outputs)
