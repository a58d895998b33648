"""Point-and-permute garbled circuits over the package gate basis.

Wire labels are 16 bytes (kappa = 128).  The select bit an evaluator sees
is a label's least-significant bit (bit 0 of byte 0); it equals the wire
value XOR a hidden per-wire permute bit, so it reveals nothing by itself.

Per-wire label derivation, deterministic in the garbling seed::

    raw    = prf(seed, "lbl" || wire_id_be32, 33)
    p      = raw[32] & 1                      # permute bit
    label0 = raw[0:16]  with lsb forced to p
    label1 = raw[16:32] with lsb forced to 1-p

Table rows (17 bytes each) encrypt `output label || check byte` under
one-time pads keyed by the input labels::

    ctx      = "grow" || gate_index_be32 || row_index
    row      = payload XOR prf(L_a, ctx)[ XOR prf(L_b, ctx)]
    payload  = label_out || check        # check bit0 = label_out lsb

The check byte's top seven bits are zero; decrypting a row with wrong
labels trips the check with probability 255/256.  Row counts: AND/XOR 4
(row index 2*sel_a + sel_b), NOT/COPY 2 (row index sel_a), CONST0/CONST1
1 -- a constant gate's single row is its active output label in the
clear, since the constant's value is already public topology.

Everything here is deterministic and batch-friendly: the same numpy
paths garble and evaluate circuits with a million gates (key-generation
circuits get garbled gate by gate into key blocks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prf as P
from .circuits import BooleanCircuit
from .errors import EvaluationError
from .fhe import RandomTape

KAPPA = 128
LABEL_BYTES = KAPPA // 8
ROW_BYTES = LABEL_BYTES + 1

ROW_COUNT = {"AND": 4, "XOR": 4, "NOT": 2, "COPY": 2, "CONST0": 1, "CONST1": 1}
_KIND_CODE = {"AND": 0, "XOR": 1, "NOT": 2, "COPY": 3, "CONST0": 4, "CONST1": 5}


def seed_key(seed) -> bytes:
    """16-byte prf key from a garbling seed (RandomTape or raw bytes)."""
    if isinstance(seed, RandomTape):
        if len(seed.bits) > 128:
            raise ValueError("garbling tape longer than 128 bits")
        return P.bits_to_bytes(list(seed.bits) + [0] * (128 - len(seed.bits)))
    if isinstance(seed, bytes) and len(seed) == 16:
        return seed
    raise ValueError("seed must be a RandomTape or 16 bytes")


@dataclass(frozen=True)
class WireLabels:
    label0: bytes
    label1: bytes

    def __post_init__(self):
        if self.label0 == self.label1:
            raise ValueError("wire labels must differ")

    @property
    def permute_bit(self) -> int:
        return self.label0[0] & 1

    def label(self, v: int) -> bytes:
        return self.label1 if v else self.label0

    def select(self, v: int) -> int:
        return self.label(v)[0] & 1


@dataclass(frozen=True)
class GarbledGate:
    index: int
    rows: tuple

    def to_bytes(self) -> bytes:
        return b"".join(self.rows)

    @staticmethod
    def from_bytes(index: int, kind: str, data: bytes) -> "GarbledGate":
        n = ROW_COUNT[kind]
        if len(data) != n * ROW_BYTES:
            raise ValueError("garbled gate body has wrong length")
        return GarbledGate(
            index, tuple(data[ROW_BYTES * j : ROW_BYTES * (j + 1)] for j in range(n))
        )


@dataclass(frozen=True)
class GarbledCircuit:
    circuit: BooleanCircuit  # public topology, constants included
    gates: tuple
    encode_info: tuple  # WireLabels per input wire
    decode_info: tuple  # permute bit per output position


# -- batched internals --------------------------------------------------------


def _be32_rows(ids: np.ndarray) -> np.ndarray:
    out = np.empty((len(ids), 4), dtype=np.uint8)
    v = ids.astype(np.uint32)
    for k in range(4):
        out[:, k] = (v >> np.uint32(8 * (3 - k))) & np.uint32(0xFF)
    return out


def derive_labels(key: bytes, wires) -> tuple[np.ndarray, np.ndarray]:
    """(label0, label1) arrays with the lsb convention baked in.

    wires: either a wire count (labels for 0..n-1) or an array of wire
    ids; each label depends only on (key, its own wire id), which is what
    makes per-gate garbling independent of the rest of the circuit.
    """
    ids = np.arange(wires) if isinstance(wires, int) else np.asarray(wires)
    datas = np.empty((len(ids), 7), dtype=np.uint8)
    datas[:, :3] = np.frombuffer(b"lbl", dtype=np.uint8)
    datas[:, 3:] = _be32_rows(ids)
    raw = P.prf_many(
        np.tile(np.frombuffer(key, dtype=np.uint8), (len(ids), 1)), datas, 3
    )
    p = raw[:, 32] & 1
    l0 = raw[:, 0:16].copy()
    l1 = raw[:, 16:32].copy()
    l0[:, 0] = (l0[:, 0] & 0xFE) | p
    l1[:, 0] = (l1[:, 0] & 0xFE) | (p ^ 1)
    return l0, l1


def _pads(keys: np.ndarray, gate_ids: np.ndarray, rows: np.ndarray) -> np.ndarray:
    datas = np.empty((len(gate_ids), 9), dtype=np.uint8)
    datas[:, :4] = np.frombuffer(b"grow", dtype=np.uint8)
    datas[:, 4:8] = _be32_rows(gate_ids)
    datas[:, 8] = rows
    return P.prf_many(keys, datas, 2)[:, :ROW_BYTES]


def _payload(out_labels: np.ndarray) -> np.ndarray:
    m = len(out_labels)
    pay = np.empty((m, ROW_BYTES), dtype=np.uint8)
    pay[:, :LABEL_BYTES] = out_labels
    pay[:, LABEL_BYTES] = out_labels[:, 0] & 1
    return pay


def garble_tables(c: BooleanCircuit, key: bytes, lo: int = 0, hi: int | None = None):
    """Table bytes for gates lo..hi-1 of c, batched.

    Returns a list of per-gate byte strings; garble() wraps them in
    GarbledGate objects, key-block generation ships them raw.
    """
    hi = len(c.gates) if hi is None else hi
    used = sorted({w for i in range(lo, hi) for w in (*c.gates[i][1], c.gates[i][2])})
    ids = np.asarray(used if used else [0], dtype=np.int64)
    l0, l1 = derive_labels(key, ids)
    perm = l0[:, 0] & 1

    def at(wire_list):
        return np.searchsorted(ids, np.asarray(wire_list, dtype=np.int64))

    idx2, a2, b2, o2, and2 = [], [], [], [], []
    idx1, a1, o1, not1 = [], [], [], []
    tables: list = [None] * (hi - lo)
    for i in range(lo, hi):
        kind, ins, out = c.gates[i]
        if kind in ("AND", "XOR"):
            idx2.append(i)
            a2.append(ins[0])
            b2.append(ins[1])
            o2.append(out)
            and2.append(kind == "AND")
        elif kind in ("NOT", "COPY"):
            idx1.append(i)
            a1.append(ins[0])
            o1.append(out)
            not1.append(kind == "NOT")
        else:
            pos = int(at([out])[0])
            lab = l1[pos] if kind == "CONST1" else l0[pos]
            tables[i - lo] = lab.tobytes() + bytes([lab[0] & 1])

    if idx2:
        g = np.repeat(np.array(idx2, dtype=np.uint32), 4)
        a = np.repeat(at(a2), 4)
        b = np.repeat(at(b2), 4)
        o = np.repeat(at(o2), 4)
        is_and = np.repeat(np.array(and2), 4)
        sa = np.tile(np.array([0, 0, 1, 1], dtype=np.uint8), len(idx2))
        sb = np.tile(np.array([0, 1, 0, 1], dtype=np.uint8), len(idx2))
        va = sa ^ perm[a]
        vb = sb ^ perm[b]
        v = np.where(is_and, va & vb, va ^ vb)
        rows = _payload(np.where(v[:, None] == 1, l1[o], l0[o]))
        rows ^= _pads(np.where(va[:, None] == 1, l1[a], l0[a]), g, 2 * sa + sb)
        rows ^= _pads(np.where(vb[:, None] == 1, l1[b], l0[b]), g, 2 * sa + sb)
        flat = rows.reshape(len(idx2), 4 * ROW_BYTES)
        for k, i in enumerate(idx2):
            tables[i - lo] = flat[k].tobytes()

    if idx1:
        g = np.repeat(np.array(idx1, dtype=np.uint32), 2)
        a = np.repeat(at(a1), 2)
        o = np.repeat(at(o1), 2)
        is_not = np.repeat(np.array(not1), 2)
        sa = np.tile(np.array([0, 1], dtype=np.uint8), len(idx1))
        va = sa ^ perm[a]
        v = np.where(is_not, va ^ 1, va)
        rows = _payload(np.where(v[:, None] == 1, l1[o], l0[o]))
        rows ^= _pads(np.where(va[:, None] == 1, l1[a], l0[a]), g, sa)
        flat = rows.reshape(len(idx1), 2 * ROW_BYTES)
        for k, i in enumerate(idx1):
            tables[i - lo] = flat[k].tobytes()

    return tables


def _gate_levels(c: BooleanCircuit) -> list:
    """Gate indices grouped by dataflow level (inputs are level 0)."""
    when = [0] * c.n_wires
    groups: dict[int, list] = {}
    for i, (kind, ins, out) in enumerate(c.gates):
        t = 1 + max((when[w] for w in ins), default=0)
        when[out] = t
        groups.setdefault(t, []).append(i)
    return [groups[t] for t in sorted(groups)]


def evaluate_tables(c: BooleanCircuit, tables, encoded) -> list:
    """Run garbled tables over topology c on active input labels.

    tables: per-gate byte strings in gate order.  encoded: one 16-byte
    active label per input wire.  Returns active labels of the output
    positions.  Levels of independent gates are processed as batches.
    """
    if len(encoded) != c.n_inputs:
        raise ValueError("encoded input width mismatch")
    if len(tables) != len(c.gates):
        raise ValueError("one table per gate required")
    active = np.zeros((c.n_wires, LABEL_BYTES), dtype=np.uint8)
    for w, lab in enumerate(encoded):
        if len(lab) != LABEL_BYTES:
            raise ValueError("labels are 16 bytes")
        active[w] = np.frombuffer(lab, dtype=np.uint8)

    offsets = np.zeros(len(tables) + 1, dtype=np.int64)
    for i, t in enumerate(tables):
        offsets[i + 1] = offsets[i] + len(t)
    rows_arr = np.frombuffer(b"".join(tables), dtype=np.uint8)
    span = np.arange(ROW_BYTES)

    # flat per-gate arrays so level batches never loop over gates in python
    kindc = np.array([_KIND_CODE[g[0]] for g in c.gates], dtype=np.uint8)
    in0 = np.array([g[1][0] if g[1] else 0 for g in c.gates], dtype=np.int64)
    in1 = np.array([g[1][1] if len(g[1]) > 1 else 0 for g in c.gates], dtype=np.int64)
    outw = np.array([g[2] for g in c.gates], dtype=np.int64)

    def fetch(gate_ids: np.ndarray, j: np.ndarray) -> np.ndarray:
        base = offsets[gate_ids] + ROW_BYTES * j.astype(np.int64)
        return rows_arr[base[:, None] + span]

    for level in _gate_levels(c):
        lv = np.asarray(level)
        kc = kindc[lv]
        two = lv[kc < 2]
        one = lv[(kc == 2) | (kc == 3)]
        con = lv[kc >= 4]
        if con.size:
            rows = fetch(con, np.zeros(con.size, dtype=np.uint8))
            _accept(rows, con)
            active[outw[con]] = rows[:, :LABEL_BYTES]
        if not (two.size or one.size):
            continue
        # one batched pad derivation per level: rows for both keys of the
        # two-input gates, then the one-input gates, stacked
        a2, b2 = in0[two], in1[two]
        sa2 = active[a2, 0] & 1
        j2 = 2 * sa2 + (active[b2, 0] & 1)
        a1 = in0[one]
        j1 = active[a1, 0] & 1
        keys = np.concatenate([active[a2], active[b2], active[a1]])
        gids = np.concatenate([two, two, one]).astype(np.uint32)
        pads = _pads(keys, gids, np.concatenate([j2, j2, j1]))
        m = two.size
        if m:
            pay = fetch(two, j2) ^ pads[:m] ^ pads[m : 2 * m]
            _accept(pay, two)
            active[outw[two]] = pay[:, :LABEL_BYTES]
        if one.size:
            pay = fetch(one, j1) ^ pads[2 * m :]
            _accept(pay, one)
            active[outw[one]] = pay[:, :LABEL_BYTES]

    return [active[w].tobytes() for w in c.output_wires]


def _accept(payloads: np.ndarray, gate_ids: np.ndarray) -> None:
    check = payloads[:, LABEL_BYTES]
    bad = (check >> 1 != 0) | ((check & 1) != (payloads[:, 0] & 1))
    if bad.any():
        raise EvaluationError(
            f"garbled row check failed at gate {int(gate_ids[bad.argmax()])}"
        )


# -- public object-level API ---------------------------------------------------


def garble(c: BooleanCircuit, seed) -> GarbledCircuit:
    """Garble every gate of c; deterministic in (c, seed)."""
    key = seed_key(seed)
    tables = garble_tables(c, key)
    l0, l1 = derive_labels(key, c.n_wires)
    gates = tuple(
        GarbledGate.from_bytes(i, c.gates[i][0], t) for i, t in enumerate(tables)
    )
    encode = tuple(
        WireLabels(l0[w].tobytes(), l1[w].tobytes()) for w in range(c.n_inputs)
    )
    decode = tuple(int(l0[w, 0] & 1) for w in c.output_wires)
    return GarbledCircuit(c, gates, encode, decode)


def garble_gate(c: BooleanCircuit, i: int, seed) -> GarbledGate:
    """Gate i's garbling alone; byte-equal to garble(c, seed).gates[i].

    Depends only on (seed, i, gate i's kind and wire ids), so blocks of a
    larger circuit sharing this gate garble identically.
    """
    if not 0 <= i < len(c.gates):
        raise IndexError("gate index out of range")
    key = seed_key(seed)
    return GarbledGate.from_bytes(i, c.gates[i][0], garble_tables(c, key, i, i + 1)[0])


def encode_input(gc: GarbledCircuit, x) -> list:
    if len(x) != gc.circuit.n_inputs:
        raise ValueError("input width mismatch")
    return [gc.encode_info[w].label(b) for w, b in enumerate(x)]


def evaluate(gc: GarbledCircuit, encoded) -> list:
    return evaluate_tables(gc.circuit, [g.to_bytes() for g in gc.gates], encoded)


def decode(gc: GarbledCircuit, out_labels) -> list:
    if len(out_labels) != len(gc.decode_info):
        raise ValueError("output width mismatch")
    return [(lab[0] & 1) ^ p for lab, p in zip(out_labels, gc.decode_info)]


def simulate(c: BooleanCircuit, output_bits, seed) -> GarbledCircuit:
    """Privacy simulator: a garbling built from the output alone.

    Only one label per wire is ever meaningful (the "active" one); the
    rows an honest evaluation would open encrypt the active path, every
    other row is an independent pseudorandom string.  Evaluating the
    result on its provided encoded input -- by convention the encoding of
    the all-zero input -- and decoding yields exactly output_bits, and
    every component has the same byte length as a real garbling's.
    """
    if len(output_bits) != c.n_outputs:
        raise ValueError("output width mismatch")
    key = seed_key(seed)
    n = c.n_wires

    datas = np.empty((n, 7), dtype=np.uint8)
    datas[:, :3] = np.frombuffer(b"sla", dtype=np.uint8)
    datas[:, 3:] = _be32_rows(np.arange(n))
    act = P.prf_many(np.tile(np.frombuffer(key, dtype=np.uint8), (n, 1)), datas, 1)[
        :, :LABEL_BYTES
    ].copy()
    datas[:, :3] = np.frombuffer(b"sld", dtype=np.uint8)
    dummy = P.prf_many(np.tile(np.frombuffer(key, dtype=np.uint8), (n, 1)), datas, 1)[
        :, :LABEL_BYTES
    ].copy()
    dummy[:, 0] = (dummy[:, 0] & 0xFE) | ((act[:, 0] & 1) ^ 1)

    tables: list = [None] * len(c.gates)
    idx2, a2, b2, o2 = [], [], [], []
    idx1, a1, o1 = [], [], []
    for i, (kind, ins, out) in enumerate(c.gates):
        if kind in ("AND", "XOR"):
            idx2.append(i)
            a2.append(ins[0])
            b2.append(ins[1])
            o2.append(out)
        elif kind in ("NOT", "COPY"):
            idx1.append(i)
            a1.append(ins[0])
            o1.append(out)
        else:
            lab = act[out]
            tables[i] = lab.tobytes() + bytes([lab[0] & 1])

    def _garbage(gate_ids: np.ndarray, rows: np.ndarray) -> np.ndarray:
        datas = np.empty((len(gate_ids), 8), dtype=np.uint8)
        datas[:, :3] = np.frombuffer(b"slg", dtype=np.uint8)
        datas[:, 3:7] = _be32_rows(gate_ids)
        datas[:, 7] = rows
        return P.prf_many(
            np.tile(np.frombuffer(key, dtype=np.uint8), (len(gate_ids), 1)), datas, 2
        )[:, :ROW_BYTES]

    if idx2:
        g4 = np.repeat(np.array(idx2, dtype=np.uint32), 4)
        j4 = np.tile(np.arange(4, dtype=np.uint8), len(idx2))
        rows = _garbage(g4, j4)
        g = np.array(idx2, dtype=np.uint32)
        a, b, o = np.array(a2), np.array(b2), np.array(o2)
        sa, sb = act[a, 0] & 1, act[b, 0] & 1
        live = _payload(act[o]) ^ _pads(act[a], g, 2 * sa + sb) ^ _pads(act[b], g, 2 * sa + sb)
        rows[4 * np.arange(len(idx2)) + (2 * sa + sb)] = live
        flat = rows.reshape(len(idx2), 4 * ROW_BYTES)
        for k, i in enumerate(idx2):
            tables[i] = flat[k].tobytes()

    if idx1:
        g2 = np.repeat(np.array(idx1, dtype=np.uint32), 2)
        j2 = np.tile(np.arange(2, dtype=np.uint8), len(idx1))
        rows = _garbage(g2, j2)
        g = np.array(idx1, dtype=np.uint32)
        a, o = np.array(a1), np.array(o1)
        sa = act[a, 0] & 1
        live = _payload(act[o]) ^ _pads(act[a], g, sa)
        rows[2 * np.arange(len(idx1)) + sa] = live
        flat = rows.reshape(len(idx1), 2 * ROW_BYTES)
        for k, i in enumerate(idx1):
            tables[i] = flat[k].tobytes()

    gates = tuple(
        GarbledGate.from_bytes(i, c.gates[i][0], t) for i, t in enumerate(tables)
    )
    encode = tuple(
        WireLabels(act[w].tobytes(), dummy[w].tobytes()) for w in range(c.n_inputs)
    )
    decode = tuple(
        int((act[w, 0] & 1) ^ output_bits[k]) for k, w in enumerate(c.output_wires)
    )
    return GarbledCircuit(c, gates, encode, decode)
