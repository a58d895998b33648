"""Decomposable public keys: stateless block generation, assembly, simulation.

A public key is producible as K+1 independent fixed-recipe blocks
c_0..c_K, each a deterministic function of (lam, index, r, r') alone --
in particular of no depth bound, so the cost and bytes of one block never
reveal how long the chain is.  Two strategies:

* bootstrapped: K = d.  Block 0 is the 9-byte pk head (lam || kid_0);
  block i is the 50-byte bridge body for level i, regenerated from the
  two adjacent sub-keys on the tape r.  Assembly is concatenation, and
  the simulator is exact: pk parses back into its blocks.

* garbled: K = gate count of the key-generation circuit for (lam, d).
  Block 0 holds the active input labels for the tape bits of r; block i
  holds gate i-1's garbled table (randomness from r'), plus one decode
  byte when that gate drives a public-key output bit.  Assembly evaluates
  the garbled circuit; the simulator is the garbling privacy simulator
  run on the output pk.

Block serialization: index (4 bytes, big-endian) || strategy tag (1
byte) || body.

The per-gate topology question ("which circuit is gate i part of, if no
d is given?") is answered by the key-generation circuit's prefix
property: gate i is identical in every circuit deep enough to contain
it, and whether its output wire is a pk bit is likewise stable, so block
bytes are d-oblivious by construction (asserted by tests, not assumed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fhe as F
from . import garble as G
from . import prf as P
from .circuits import BooleanCircuit
from .errors import AssemblyError
from .fhe import FheParams, PublicKey, RandomTape

STRATEGIES = ("bootstrapped", "garbled")
_TAG = {"bootstrapped": 0, "garbled": 1}
_TAG_BACK = {v: k for k, v in _TAG.items()}


@dataclass(frozen=True)
class KeyBlock:
    index: int
    strategy: str
    body: bytes

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.index < 0:
            raise ValueError("block index must be non-negative")

    def to_bytes(self) -> bytes:
        return self.index.to_bytes(4, "big") + bytes([_TAG[self.strategy]]) + self.body

    @staticmethod
    def from_bytes(data: bytes) -> "KeyBlock":
        if len(data) < 5 or data[4] not in _TAG_BACK:
            raise ValueError("malformed key block")
        return KeyBlock(int.from_bytes(data[:4], "big"), _TAG_BACK[data[4]], data[5:])


def blocks_needed(lam: int, d: int, strategy: str) -> int:
    """K(lam, d): the largest block index for the intended depth bound."""
    if strategy == "bootstrapped":
        return d
    if strategy == "garbled":
        return len(F.keygen_circuit(lam, d).gates)
    raise ValueError(f"unknown strategy {strategy!r}")


# -- garbled-strategy topology bookkeeping ------------------------------------

_counts: dict = {}  # lam -> gate counts per d, grown on demand


def _topology_depth_for(lam: int, n_gates_over: int) -> int:
    """Smallest d whose key-generation circuit has more than n_gates_over gates."""
    counts = _counts.setdefault(lam, [])
    d = 0
    while True:
        if d == len(counts):
            counts.append(len(F.keygen_circuit(lam, d).gates))
        if counts[d] > n_gates_over:
            return d
        d += 1
        if d > 255:
            raise ValueError("gate index beyond any supported depth bound")


def _depth_for_count(lam: int, n_gates: int) -> int:
    counts = _counts.setdefault(lam, [])
    d = 0
    while True:
        if d == len(counts):
            counts.append(len(F.keygen_circuit(lam, d).gates))
        if counts[d] == n_gates:
            return d
        if counts[d] > n_gates or d == 255:
            raise AssemblyError("block count matches no key-generation circuit")
        d += 1


def _gate_block_body(t: BooleanCircuit, key: bytes, gate_idx: int, outs) -> bytes:
    body = G.garble_tables(t, key, gate_idx, gate_idx + 1)[0]
    out_wire = t.gates[gate_idx][2]
    if out_wire in outs:
        l0, _ = G.derive_labels(key, np.asarray([out_wire]))
        body += bytes([int(l0[0, 0]) & 1])
    return body


# -- block generation ----------------------------------------------------------


def block_gen(lam: int, i: int, r: RandomTape, rp: RandomTape, strategy: str) -> KeyBlock:
    """One public-key block; stateless and oblivious of any depth bound.

    The bootstrapped strategy never reads r'; the garbled strategy draws
    all labels from r' and uses r only for block 0's active labels.
    """
    if len(r.bits) != lam:
        raise ValueError("tape length must equal lam")
    if strategy == "bootstrapped":
        tape_key = r.key16()
        t_i = F._tape(tape_key, i)
        secret_i, nonce_i = t_i[:4], t_i[4:]
        kid_i = F._kid_of(secret_i)
        F._register(kid_i, secret_i)
        if i == 0:
            return KeyBlock(0, strategy, bytes([lam]) + kid_i)
        prev = F._tape(tape_key, i - 1)[:4]
        return KeyBlock(i, strategy, F._bridge_body(secret_i, kid_i, nonce_i, prev))
    if strategy == "garbled":
        key = G.seed_key(rp)
        if i == 0:
            l0, l1 = G.derive_labels(key, np.arange(lam))
            body = b"".join(
                (l1 if b else l0)[w].tobytes() for w, b in enumerate(r.bits)
            )
            return KeyBlock(0, strategy, body)
        t = F.keygen_circuit(lam, _topology_depth_for(lam, i - 1))
        return KeyBlock(i, strategy, _gate_block_body(t, key, i - 1, set(t.output_wires)))
    raise ValueError(f"unknown strategy {strategy!r}")


def block_gen_range(
    lam: int, lo: int, hi: int, r: RandomTape, rp: RandomTape, strategy: str
) -> list:
    """Blocks lo..hi-1, byte-identical to per-index block_gen but batched.

    The garbled strategy garbles the covered gate range in one vectorized
    pass; per-block calls would re-derive labels one gate at a time.
    """
    if strategy != "garbled":
        return [block_gen(lam, i, r, rp, strategy) for i in range(lo, hi)]
    if len(r.bits) != lam:
        raise ValueError("tape length must equal lam")
    if hi <= lo:
        return []
    key = G.seed_key(rp)
    out = []
    if lo == 0:
        out.append(block_gen(lam, 0, r, rp, strategy))
        lo = 1
        if hi == 1:
            return out
    t = F.keygen_circuit(lam, _topology_depth_for(lam, hi - 2))
    outs = set(t.output_wires)
    tables = G.garble_tables(t, key, lo - 1, hi - 1)
    out_wires = [t.gates[g][2] for g in range(lo - 1, hi - 1)]
    l0, _ = G.derive_labels(key, np.asarray(out_wires))
    for k, i in enumerate(range(lo, hi)):
        body = tables[k]
        if out_wires[k] in outs:
            body += bytes([int(l0[k, 0]) & 1])
        out.append(KeyBlock(i, strategy, body))
    return out


# -- assembly ------------------------------------------------------------------


def _check_sequence(blocks) -> str:
    if not blocks:
        raise AssemblyError("no blocks to assemble")
    strategy = blocks[0].strategy
    for k, b in enumerate(blocks):
        if b.index != k:
            raise AssemblyError(f"expected block {k}, got index {b.index}")
        if b.strategy != strategy:
            raise AssemblyError("mixed strategies in one assembly")
    return strategy


def assemble(blocks) -> PublicKey:
    """Blocks 0..K, in order -> the public key they decompose."""
    strategy = _check_sequence(blocks)
    if strategy == "bootstrapped":
        if len(blocks[0].body) != F.BLOCK0_BYTES:
            raise AssemblyError("bootstrapped block 0 must be the 9-byte pk head")
        lam = blocks[0].body[0]
        try:
            return PublicKey(
                FheParams(lam, len(blocks) - 1), b"".join(b.body for b in blocks)
            )
        except ValueError as e:
            raise AssemblyError(str(e)) from e

    body0 = blocks[0].body
    if len(body0) % G.LABEL_BYTES != 0:
        raise AssemblyError("garbled block 0 must hold 16-byte input labels")
    lam = len(body0) // G.LABEL_BYTES
    d = _depth_for_count(lam, len(blocks) - 1)
    t = F.keygen_circuit(lam, d)
    outs = set(t.output_wires)
    tables, decode = [], {}
    for g, b in enumerate(blocks[1:]):
        kind = t.gates[g][0]
        want = G.ROW_COUNT[kind] * G.ROW_BYTES
        body = b.body
        if t.gates[g][2] in outs:
            if len(body) != want + 1:
                raise AssemblyError(f"block {g + 1} missing its decode byte")
            decode[t.gates[g][2]] = body[-1]
            body = body[:-1]
        elif len(body) != want:
            raise AssemblyError(f"block {g + 1} has a malformed garbled table")
        tables.append(body)
    encoded = [
        body0[G.LABEL_BYTES * w : G.LABEL_BYTES * (w + 1)] for w in range(lam)
    ]
    labels = G.evaluate_tables(t, tables, encoded)
    bits = [
        (lab[0] & 1) ^ decode[w] for lab, w in zip(labels, t.output_wires)
    ]
    try:
        return PublicKey(FheParams(lam, d), P.bits_to_bytes(bits))
    except ValueError as e:
        raise AssemblyError(str(e)) from e


# -- simulation ----------------------------------------------------------------


def sim_blocks(lam: int, pk: PublicKey, strategy: str, seed: bytes | None = None) -> list:
    """Blocks reproduced from the assembled key alone.

    Bootstrapped blocks are recovered exactly by parsing.  Garbled blocks
    come from the garbling privacy simulator run on the pk bits; the seed
    defaults to a hash of the key so reports stay reproducible (a fresh
    random seed is the adversarial reading; pass one to get it).
    """
    if lam != pk.params.lam:
        raise ValueError("lam does not match the key's parameters")
    if strategy == "bootstrapped":
        raw = pk.key_bytes
        blocks = [KeyBlock(0, strategy, raw[: F.BLOCK0_BYTES])]
        for i in range(1, pk.params.d + 1):
            lo = F.BLOCK0_BYTES + F.BLOCK_BYTES * (i - 1)
            blocks.append(KeyBlock(i, strategy, raw[lo : lo + F.BLOCK_BYTES]))
        return blocks
    if strategy != "garbled":
        raise ValueError(f"unknown strategy {strategy!r}")

    if seed is None:
        seed = P.prf_hash(b"block-sim/" + pk.key_bytes, 16)
    t = F.keygen_circuit(lam, pk.params.d)
    bits = P.bytes_to_bits(pk.key_bytes)
    sim = G.simulate(t, bits, seed)
    decode: dict = {}
    for k, w in enumerate(t.output_wires):
        p = sim.decode_info[k]
        if decode.setdefault(w, p) != p:
            raise AssemblyError("inconsistent decode bits for a shared output wire")
    blocks = [
        KeyBlock(0, "garbled", b"".join(wl.label0 for wl in sim.encode_info))
    ]
    for g, gg in enumerate(sim.gates):
        body = gg.to_bytes()
        w = t.gates[g][2]
        if w in decode:
            body += bytes([decode[w]])
        blocks.append(KeyBlock(g + 1, "garbled", body))
    return blocks
