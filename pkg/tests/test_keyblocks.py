"""Decomposable public keys: block recipes, assembly, and simulators.

The load-bearing properties: every block is a fixed function of
(lam, index, tapes) with no depth input anywhere in its recipe, assembly
of blocks 0..K reproduces keygen's pk byte for byte, and the per-strategy
simulators emit structurally identical blocks from the pk alone.
"""

import numpy as np
import pytest

import obflab.fhe as F
import obflab.garble as G
import obflab.keyblocks as KB
import obflab.prf as P
from obflab.errors import AssemblyError, EvaluationError
from obflab.fhe import FheParams, RandomTape


def _tape(seed, lam=6):
    return RandomTape.random(lam, np.random.default_rng(seed))


def test_bootstrapped_block_oracle():
    # independent recomputation of every block body from the raw prf chain
    r, rp = _tape(1), _tape(2)
    tk = r.key16()
    tapes = [P.prf(tk, b"tape" + bytes([i]), 8) for i in range(6)]
    secrets = [t[:4] for t in tapes]
    kids = [P.prf(s + bytes(12), b"kid", 8) for s in secrets]

    b0 = KB.block_gen(6, 0, r, rp, "bootstrapped")
    assert b0.body == bytes([6]) + kids[0]
    for i in range(1, 6):
        bi = KB.block_gen(6, i, r, rp, "bootstrapped")
        assert bi.index == i
        assert len(bi.body) == F.BLOCK_BYTES
        assert bi.body[:8] == kids[i]
        assert bi.body[8:10] == (0).to_bytes(2, "big")
        assert bi.body[10:14] == tapes[i][4:8]
        sk_i = F.SecretKey(secrets[i], kids[i])
        got = P.bits_to_bytes(F.dec(sk_i, F.expand_bridge(bi.body)))
        assert got == secrets[i - 1]


def test_bootstrapped_ignores_second_tape():
    r = _tape(3)
    for i in range(3):
        a = KB.block_gen(6, i, r, _tape(4), "bootstrapped")
        b = KB.block_gen(6, i, r, _tape(5), "bootstrapped")
        assert a.body == b.body


@pytest.mark.parametrize("d", [0, 1, 4])
def test_bootstrapped_assemble_matches_keygen(d):
    r = _tape(10 + d)
    kp = F.keygen(FheParams(6, d), r)
    blocks = KB.block_gen_range(6, 0, d + 1, r, _tape(99), "bootstrapped")
    pk = KB.assemble(blocks)
    assert pk.key_bytes == kp.pk.key_bytes
    assert pk.params == kp.pk.params


def test_bootstrapped_blocks_are_depth_oblivious():
    # one run of block recipes serves every depth bound: prefixes of the
    # same block list assemble into the keys of every smaller d
    r = _tape(20)
    blocks = KB.block_gen_range(6, 0, 7, r, _tape(99), "bootstrapped")
    for d in (0, 2, 6):
        kp = F.keygen(FheParams(6, d), r)
        assert KB.assemble(blocks[: d + 1]).key_bytes == kp.pk.key_bytes


def test_bootstrapped_sim_blocks_exact():
    r = _tape(21)
    kp = F.keygen(FheParams(6, 4), r)
    real = KB.block_gen_range(6, 0, 5, r, _tape(99), "bootstrapped")
    sim = KB.sim_blocks(6, kp.pk, "bootstrapped")
    assert len(sim) == len(real)
    for s, b in zip(sim, real):
        assert (s.index, s.strategy, s.body) == (b.index, b.strategy, b.body)


def test_blocks_needed():
    for d in (0, 1, 2):
        assert KB.blocks_needed(6, d, "bootstrapped") == d
        assert KB.blocks_needed(6, d, "garbled") == len(F.keygen_circuit(6, d).gates)
    with pytest.raises(ValueError):
        KB.blocks_needed(6, 1, "made-up")


def test_garbled_blocks_match_full_garbling():
    r, rp = _tape(30), _tape(31)
    key = G.seed_key(rp)
    t = F.keygen_circuit(6, 0)
    outs = set(t.output_wires)
    full = G.garble_tables(t, key)
    l0, l1 = G.derive_labels(key, np.arange(6))

    b0 = KB.block_gen(6, 0, r, rp, "garbled")
    want0 = b"".join((l1[w] if b else l0[w]).tobytes() for w, b in enumerate(r.bits))
    assert b0.body == want0

    rng = np.random.default_rng(7)
    for i in rng.integers(1, len(t.gates) + 1, size=12):
        blk = KB.block_gen(6, int(i), r, rp, "garbled")
        body, gate = blk.body, t.gates[int(i) - 1]
        if gate[2] in outs:
            p0, _ = G.derive_labels(key, np.asarray([gate[2]]))
            assert body == full[int(i) - 1] + bytes([int(p0[0, 0]) & 1])
        else:
            assert body == full[int(i) - 1]


def test_garbled_block_gen_is_depth_oblivious():
    # the same gate index garbles to the same bytes no matter how deep a
    # circuit it is computed against (prefix property of the topology)
    r, rp = _tape(32), _tape(33)
    key = G.seed_key(rp)
    big = F.keygen_circuit(6, 2)
    outs = set(big.output_wires)
    n0 = len(F.keygen_circuit(6, 0).gates)
    rng = np.random.default_rng(8)
    for i in rng.integers(1, n0 + 1, size=8):
        blk = KB.block_gen(6, int(i), r, rp, "garbled")
        body = G.garble_tables(big, key, int(i) - 1, int(i))[0]
        w = big.gates[int(i) - 1][2]
        if w in outs:
            p0, _ = G.derive_labels(key, np.asarray([w]))
            body += bytes([int(p0[0, 0]) & 1])
        assert blk.body == body


def test_garbled_bulk_matches_scalar():
    r, rp = _tape(34), _tape(35)
    lo, hi = 37, 61
    bulk = KB.block_gen_range(6, lo, hi, r, rp, "garbled")
    assert [b.index for b in bulk] == list(range(lo, hi))
    rng = np.random.default_rng(9)
    for k in rng.integers(0, hi - lo, size=6):
        one = KB.block_gen(6, lo + int(k), r, rp, "garbled")
        assert bulk[int(k)].body == one.body


@pytest.mark.parametrize("d", [0, 1])
def test_garbled_assemble_matches_keygen(d):
    r, rp = _tape(40 + d), _tape(41 + d)
    kp = F.keygen(FheParams(6, d), r)
    n = KB.blocks_needed(6, d, "garbled")
    blocks = KB.block_gen_range(6, 0, n + 1, r, rp, "garbled")
    pk = KB.assemble(blocks)
    assert pk.params == FheParams(6, d)
    assert pk.key_bytes == kp.pk.key_bytes


def test_garbled_decode_bytes_sit_on_output_gates():
    r, rp = _tape(42), _tape(43)
    t = F.keygen_circuit(6, 0)
    n = len(t.gates)
    blocks = KB.block_gen_range(6, 0, n + 1, r, rp, "garbled")
    extra = sum(
        1
        for g, b in enumerate(blocks[1:])
        if len(b.body) == G.ROW_COUNT[t.gates[g][0]] * G.ROW_BYTES + 1
    )
    assert extra == len(set(t.output_wires))


def test_garbled_sim_blocks():
    r, rp = _tape(44), _tape(45)
    kp = F.keygen(FheParams(6, 0), r)
    n = KB.blocks_needed(6, 0, "garbled")
    real = KB.block_gen_range(6, 0, n + 1, r, rp, "garbled")
    sim = KB.sim_blocks(6, kp.pk, "garbled")
    assert len(sim) == len(real)
    for s, b in zip(sim, real):
        assert s.index == b.index
        assert len(s.body) == len(b.body)
    assert any(s.body != b.body for s, b in zip(sim, real))
    # simulated blocks assemble and decode to exactly the observed pk
    assert KB.assemble(sim).key_bytes == kp.pk.key_bytes
    # deterministic by default, adversarially fresh on request
    again = KB.sim_blocks(6, kp.pk, "garbled")
    assert [s.body for s in again] == [s.body for s in sim]
    other = KB.sim_blocks(6, kp.pk, "garbled", seed=bytes(16))
    assert any(s.body != o.body for s, o in zip(sim, other))


def test_assemble_error_paths():
    r = _tape(50)
    blocks = KB.block_gen_range(6, 0, 4, r, _tape(99), "bootstrapped")
    with pytest.raises(AssemblyError):
        KB.assemble([])
    with pytest.raises(AssemblyError):
        KB.assemble(blocks[1:])  # missing block 0
    with pytest.raises(AssemblyError):
        KB.assemble([blocks[0], blocks[2], blocks[1], blocks[3]])
    with pytest.raises(AssemblyError):
        KB.assemble([blocks[0], blocks[2], blocks[3]])  # gap
    mixed = [blocks[0], KB.KeyBlock(1, "garbled", blocks[1].body)]
    with pytest.raises(AssemblyError):
        KB.assemble(mixed)
    with pytest.raises(AssemblyError):
        KB.assemble([KB.KeyBlock(0, "bootstrapped", b"short")])


def test_garbled_assemble_error_paths():
    r, rp = _tape(51), _tape(52)
    n = KB.blocks_needed(6, 0, "garbled")
    blocks = KB.block_gen_range(6, 0, n + 1, r, rp, "garbled")
    with pytest.raises(AssemblyError):
        KB.assemble(blocks[:-1])  # count matches no topology
    bad0 = [KB.KeyBlock(0, "garbled", blocks[0].body[:-1])] + blocks[1:]
    with pytest.raises(AssemblyError):
        KB.assemble(bad0)
    body = bytearray(blocks[1].body)
    body[3] ^= 0x40
    corrupt = [blocks[0], KB.KeyBlock(1, "garbled", bytes(body))] + blocks[2:]
    with pytest.raises(EvaluationError):
        KB.assemble(corrupt)


def test_block_serialization_roundtrip():
    r = _tape(60)
    for blk in KB.block_gen_range(6, 0, 3, r, _tape(61), "bootstrapped"):
        back = KB.KeyBlock.from_bytes(blk.to_bytes())
        assert (back.index, back.strategy, back.body) == (
            blk.index,
            blk.strategy,
            blk.body,
        )
    raw = KB.block_gen(6, 2, r, _tape(61), "garbled").to_bytes()
    assert raw[4] == 1 and raw[:4] == (2).to_bytes(4, "big")
    with pytest.raises(ValueError):
        KB.KeyBlock.from_bytes(b"\x00\x00\x00\x01\x07rest")
    with pytest.raises(ValueError):
        KB.KeyBlock.from_bytes(b"\x00\x00")


def test_block_gen_validates_arguments():
    with pytest.raises(ValueError):
        KB.block_gen(6, 0, _tape(70, lam=4), _tape(71), "bootstrapped")
    with pytest.raises(ValueError):
        KB.block_gen(6, 0, _tape(70), _tape(71), "made-up")
    with pytest.raises(ValueError):
        KB.KeyBlock(-1, "garbled", b"")
