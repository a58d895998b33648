"""Structured construction of BooleanCircuits.

A thin layer over the circuit IR for building word-oriented circuits:
wires are handled in little-endian bit vectors (bit 0 = LSB, matching the
package-wide packing convention), with ripple-carry adders, rotations as
free wire permutations, and balanced reduction trees.

Also hosts the boolean-circuit mirror of the prf module's keyed hash; the
mirror follows prf.prf operation by operation so that circuit evaluation
is bit-identical to the scalar reference (tested exhaustively on short
inputs).
"""

from __future__ import annotations

from .circuits import BooleanCircuit
from .prf import _le128, _pad  # fixed layout helpers shared with the reference


class CircuitBuilder:
    def __init__(self, n_inputs: int):
        self.n_inputs = n_inputs
        self.gates: list = []
        self._zero = None
        self._one = None

    def emit(self, kind: str, *ins: int) -> int:
        out = self.n_inputs + len(self.gates)
        self.gates.append((kind, tuple(ins), out))
        return out

    def inputs(self) -> list[int]:
        return list(range(self.n_inputs))

    def finish(self, output_wires) -> BooleanCircuit:
        return BooleanCircuit(
            self.n_inputs, len(output_wires), tuple(self.gates), tuple(output_wires)
        )

    # -- scalars -----------------------------------------------------------

    def const(self, bit: int) -> int:
        # Constants are always fresh gates: the ordered CONST vector is the
        # member description section, so constants must never be shared.
        return self.emit("CONST1" if bit else "CONST0")

    def cached_const(self, bit: int) -> int:
        """A shareable constant for structural glue (never part of a
        description section)."""
        if bit:
            if self._one is None:
                self._one = self.emit("CONST1")
            return self._one
        if self._zero is None:
            self._zero = self.emit("CONST0")
        return self._zero

    def xor(self, a: int, b: int) -> int:
        return self.emit("XOR", a, b)

    def and_(self, a: int, b: int) -> int:
        return self.emit("AND", a, b)

    def not_(self, a: int) -> int:
        return self.emit("NOT", a)

    def or_(self, a: int, b: int) -> int:
        return self.not_(self.and_(self.not_(a), self.not_(b)))

    def mux(self, s: int, a: int, b: int) -> int:
        """s ? a : b"""
        return self.xor(b, self.and_(s, self.xor(a, b)))

    # -- bit vectors ---------------------------------------------------------

    def const_bits(self, bits) -> list[int]:
        return [self.const(b) for b in bits]

    def const_bytes(self, data: bytes) -> list[int]:
        return [self.const((byte >> k) & 1) for byte in data for k in range(8)]

    def xor_v(self, a, b) -> list[int]:
        return [self.xor(x, y) for x, y in zip(a, b, strict=True)]

    def xor_const_v(self, a, const_bits) -> list[int]:
        """XOR with a compile-time constant: NOT where the bit is set."""
        return [self.not_(x) if c else x for x, c in zip(a, const_bits, strict=True)]

    def and_v(self, a, b) -> list[int]:
        return [self.and_(x, y) for x, y in zip(a, b, strict=True)]

    def rotl32(self, v, r: int) -> list[int]:
        return [v[(j - r) % 32] for j in range(32)]

    def add32(self, a, b) -> list[int]:
        s = [self.xor(a[0], b[0])]
        carry = self.and_(a[0], b[0])
        for i in range(1, 32):
            t = self.xor(a[i], b[i])
            s.append(self.xor(t, carry))
            if i < 31:
                carry = self.xor(self.and_(a[i], b[i]), self.and_(t, carry))
        return s

    def balanced_tree(self, wires, op) -> int:
        """Reduce wires with a binary op in a balanced (log-depth) tree."""
        layer = list(wires)
        if not layer:
            raise ValueError("empty reduction")
        while len(layer) > 1:
            nxt = []
            for i in range(0, len(layer) - 1, 2):
                nxt.append(op(layer[i], layer[i + 1]))
            if len(layer) % 2:
                nxt.append(layer[-1])
            layer = nxt
        return layer[0]

    def eq_const(self, wires, const_bits) -> int:
        """1 iff the wire vector equals the constant bit vector."""
        matched = [
            w if c else self.not_(w) for w, c in zip(wires, const_bits, strict=True)
        ]
        return self.balanced_tree(matched, self.and_)

    def fanout(self, wire: int, n: int) -> list[int]:
        """n copies of a wire via a log-depth COPY tree.

        The reversible compilation of a COPY is a CNOT onto a fresh wire;
        gates sharing a wire serialize in the depth metric, so wide reuse
        of one wire must go through an explicit doubling tree.
        """
        copies = [wire]
        while len(copies) < n:
            fresh = [self.emit("COPY", c) for c in copies[: n - len(copies)]]
            copies += fresh
        return copies[:n]

    # -- keyed hash mirror ----------------------------------------------------

    def chaskey_perm_v(self, state) -> list[int]:
        if len(state) != 128:
            raise ValueError("state must be 128 wires")
        v = [state[0:32], state[32:64], state[64:96], state[96:128]]
        v0, v1, v2, v3 = v
        for _ in range(8):
            v0 = self.add32(v0, v1)
            v1 = self.xor_v(self.rotl32(v1, 5), v0)
            v0 = self.rotl32(v0, 16)
            v2 = self.add32(v2, v3)
            v3 = self.xor_v(self.rotl32(v3, 8), v2)
            v0 = self.add32(v0, v3)
            v3 = self.xor_v(self.rotl32(v3, 13), v0)
            v2 = self.add32(v2, v1)
            v1 = self.xor_v(self.rotl32(v1, 7), v2)
            v2 = self.rotl32(v2, 16)
        return v0 + v1 + v2 + v3

    def prf_v(self, key_wires, data_wires, n_out: int) -> list[int]:
        """Mirror of prf.prf on wire vectors.

        key_wires: 128 wires; data_wires: 8*L wires for an L-byte message
        (length fixed at build time); returns 8*n_out wires.
        """
        if len(key_wires) != 128:
            raise ValueError("key must be 128 wires")
        if len(data_wires) % 8:
            raise ValueError("data must be whole bytes")
        length = len(data_wires) // 8
        lenconst = _bits_of(_le128(length))
        h = self.chaskey_perm_v(self.xor_const_v(key_wires, lenconst))
        # fixed padding: 0x80 then zeros to a 16-byte multiple
        pad = _bits_of(_pad(b"\x00" * length)[length:])
        padded = list(data_wires) + self.const_bits(pad)
        for i in range(0, len(padded), 128):
            h = self.chaskey_perm_v(self.xor_v(h, padded[i : i + 128]))
        h = self.xor_v(h, key_wires)
        out: list[int] = []
        j = 0
        while len(out) < 8 * n_out:
            out += self.chaskey_perm_v(self.xor_const_v(h, _bits_of(_le128(j))))
            j += 1
        return out[: 8 * n_out]

    def prf_const_key_v(self, key: bytes, data_wires, n_out: int) -> list[int]:
        return self.prf_v(self.const_bytes(key), data_wires, n_out)


def _bits_of(data: bytes) -> list[int]:
    return [(byte >> k) & 1 for byte in data for k in range(8)]
