"""Boolean and reversible circuit intermediate representation.

BooleanCircuit is the lingua franca of the package: homomorphic
evaluation, garbling, family members and interpreters all consume or
produce it.  The representation is static single assignment: wires
0..n_inputs-1 are the inputs and gate i defines wire n_inputs + i, so a
gate list is automatically a DAG and the netlist text form is canonical.

Gate basis: AND, XOR, NOT, CONST0, CONST1, COPY.  Reversible compilation
targets {X, CNOT, CCX} with one fresh zero-initialised ancilla per gate,
which keeps the depth inflation factor at K = 2 (each boolean gate
becomes at most two sequential reversible operations).

Conventions: bit 0 of any packed value is the least significant; netlists
are ASCII lines terminated by a single newline each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GATE_ARITY = {"AND": 2, "XOR": 2, "NOT": 1, "CONST0": 0, "CONST1": 0, "COPY": 1}

Gate = tuple  # (kind, in_wires tuple, out_wire)


@dataclass(frozen=True)
class BooleanCircuit:
    n_inputs: int
    n_outputs: int
    gates: tuple
    output_wires: tuple

    def __post_init__(self):
        n_wires = self.n_inputs + len(self.gates)
        for i, (kind, ins, out) in enumerate(self.gates):
            if kind not in GATE_ARITY:
                raise ValueError(f"unknown gate kind {kind!r}")
            if len(ins) != GATE_ARITY[kind]:
                raise ValueError(f"gate {i}: {kind} takes {GATE_ARITY[kind]} inputs")
            if out != self.n_inputs + i:
                raise ValueError(f"gate {i}: output wire must be {self.n_inputs + i}")
            for w in ins:
                if not 0 <= w < out:
                    raise ValueError(f"gate {i} reads undefined wire {w}")
        if len(self.output_wires) != self.n_outputs:
            raise ValueError("output_wires length does not match n_outputs")
        for w in self.output_wires:
            if not 0 <= w < n_wires:
                raise ValueError(f"output wire {w} undefined")

    @property
    def n_wires(self) -> int:
        return self.n_inputs + len(self.gates)

    def eval(self, x) -> list[int]:
        """Evaluate on a bit sequence; returns output bits."""
        if len(x) != self.n_inputs:
            raise ValueError("input width mismatch")
        w = list(x) + [0] * len(self.gates)
        for kind, ins, out in self.gates:
            if kind == "AND":
                w[out] = w[ins[0]] & w[ins[1]]
            elif kind == "XOR":
                w[out] = w[ins[0]] ^ w[ins[1]]
            elif kind == "NOT":
                w[out] = 1 - w[ins[0]]
            elif kind == "COPY":
                w[out] = w[ins[0]]
            elif kind == "CONST0":
                w[out] = 0
            else:  # CONST1
                w[out] = 1
        return [w[o] for o in self.output_wires]

    def depth(self) -> int:
        """Longest gate path; inputs sit at depth 0, constants at depth 1."""
        d = [0] * self.n_wires
        best = 0
        for kind, ins, out in self.gates:
            d[out] = 1 + max((d[w] for w in ins), default=0)
            if d[out] > best:
                best = d[out]
        return best

    # -- constants section ------------------------------------------------
    # Family members of a common template differ only in their CONST gate
    # values; the ordered CONST value vector is the varying section of the
    # canonical netlist and doubles as the member description string.

    def const_bits(self) -> list[int]:
        return [1 if g[0] == "CONST1" else 0 for g in self.gates if g[0] in ("CONST0", "CONST1")]

    def with_const_bits(self, bits) -> "BooleanCircuit":
        """Same topology with the first len(bits) CONST gate values replaced
        in emission order (later constants are structural glue and keep
        their values)."""
        bits = list(bits)
        k = 0
        gates = []
        for kind, ins, out in self.gates:
            if kind in ("CONST0", "CONST1") and k < len(bits):
                kind = "CONST1" if bits[k] else "CONST0"
                k += 1
            gates.append((kind, ins, out))
        if k < len(bits):
            raise ValueError("more constant bits than CONST gates")
        return BooleanCircuit(self.n_inputs, self.n_outputs, tuple(gates), self.output_wires)

    # -- netlist text form -------------------------------------------------

    def to_netlist(self) -> str:
        lines = [f"inputs {self.n_inputs} outputs {self.n_outputs} wires {self.n_wires}"]
        for kind, ins, out in self.gates:
            lines.append(" ".join([kind, *map(str, ins), str(out)]))
        lines.append("outwires " + " ".join(map(str, self.output_wires)))
        return "\n".join(lines) + "\n"


def from_netlist(text: str) -> BooleanCircuit:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "inputs" or head[2] != "outputs" or head[4] != "wires":
        raise ValueError("bad netlist header")
    n_in, n_out, n_wires = int(head[1]), int(head[3]), int(head[5])
    if not lines[-1].startswith("outwires"):
        raise ValueError("missing outwires line")
    gates = []
    for ln in lines[1:-1]:
        parts = ln.split()
        kind, nums = parts[0], [int(p) for p in parts[1:]]
        gates.append((kind, tuple(nums[:-1]), nums[-1]))
    outs = tuple(int(p) for p in lines[-1].split()[1:])
    c = BooleanCircuit(n_in, n_out, tuple(gates), outs)
    if c.n_wires != n_wires:
        raise ValueError("wire count disagrees with header")
    return c


# ---------------------------------------------------------------------------
# Function specifications: the tiny function classes the lab obfuscates.
# The compute-and-compare variants here take f = identity (equality against
# the target); lockers over sealed decryption are built in ccobf, not as
# netlists.
# ---------------------------------------------------------------------------

FN_KINDS = ("POINT", "MULTIBIT_POINT", "ZERO", "CC", "MULTIBIT_CC")


@dataclass(frozen=True)
class FunctionSpec:
    kind: str
    n_inputs: int
    target: tuple = ()   # y for point/cc kinds
    payload: tuple = ()  # z for multibit kinds

    def __post_init__(self):
        if self.kind not in FN_KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind in ("POINT", "MULTIBIT_POINT", "CC", "MULTIBIT_CC"):
            if len(self.target) != self.n_inputs:
                raise ValueError("target width must equal input width")
        if self.kind in ("MULTIBIT_POINT", "MULTIBIT_CC") and not self.payload:
            raise ValueError("multibit kinds need a payload")

    @property
    def n_outputs(self) -> int:
        if self.kind in ("POINT", "CC"):
            return 1
        if self.kind == "ZERO":
            return self.n_inputs
        return len(self.payload)

    def eval(self, x) -> list[int]:
        """Reference semantics, independent of the compiled netlist."""
        if self.kind == "ZERO":
            return [0] * self.n_inputs
        hit = tuple(x) == tuple(self.target)
        if self.kind in ("POINT", "CC"):
            return [1 if hit else 0]
        return list(self.payload) if hit else [0] * len(self.payload)


def build_function(spec: FunctionSpec) -> BooleanCircuit:
    """Compile a FunctionSpec to a netlist in the standard basis."""
    n = spec.n_inputs
    gates: list[Gate] = []

    def emit(kind, *ins):
        out = n + len(gates)
        gates.append((kind, tuple(ins), out))
        return out

    if spec.kind == "ZERO":
        outs = tuple(emit("CONST0") for _ in range(n))
        return BooleanCircuit(n, n, tuple(gates), outs)

    # equality of input against the target, as a balanced AND tree
    layer = []
    for i, yi in enumerate(spec.target):
        layer.append(i if yi else emit("NOT", i))
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            nxt.append(emit("AND", layer[i], layer[i + 1]))
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    eq = layer[0] if layer else emit("CONST1")
    if eq < n:  # target was a lone 1-bit: copy so outputs sit on gate wires
        eq = emit("COPY", eq)

    if spec.kind in ("POINT", "CC"):
        return BooleanCircuit(n, 1, tuple(gates), (eq,))

    outs = []
    for z in spec.payload:
        outs.append(emit("COPY", eq) if z else emit("CONST0"))
    return BooleanCircuit(n, len(outs), tuple(gates), tuple(outs))


# ---------------------------------------------------------------------------
# Reversible form.
# ---------------------------------------------------------------------------

REV_ARITY = {"X": 1, "CNOT": 2, "CCX": 3}


@dataclass(frozen=True)
class ReversibleCircuit:
    """Gate list over {X, CNOT, CCX}; last wire of each gate is the target.

    Wires 0..n_inputs-1 carry the input; every other wire must enter as 0
    (they are allocated by the compiler as ancillas).  Every gate is its
    own inverse, so running the reversed gate list undoes the circuit.
    """

    n_inputs: int
    n_wires: int
    gates: tuple
    output_wires: tuple

    def __post_init__(self):
        for kind, ws in self.gates:
            if kind not in REV_ARITY or len(ws) != REV_ARITY[kind]:
                raise ValueError(f"bad reversible gate {kind} {ws}")
            if len(set(ws)) != len(ws):
                raise ValueError("reversible gate wires must be distinct")
            for w in ws:
                if not 0 <= w < self.n_wires:
                    raise ValueError("gate wire out of range")

    def run(self, x) -> list[int]:
        full = self.run_full(x)
        return [full[o] for o in self.output_wires]

    def run_full(self, x) -> list[int]:
        """Full wire state after the run; inputs beyond n_inputs start 0."""
        if len(x) != self.n_inputs:
            raise ValueError("input width mismatch")
        w = list(x) + [0] * (self.n_wires - self.n_inputs)
        for kind, ws in self.gates:
            if kind == "X":
                w[ws[0]] ^= 1
            elif kind == "CNOT":
                w[ws[1]] ^= w[ws[0]]
            else:
                w[ws[2]] ^= w[ws[0]] & w[ws[1]]
        return w

    def inverse_gates(self) -> tuple:
        return tuple(reversed(self.gates))

    def depth(self, weights=None) -> int:
        """Physical critical-path depth: gates sharing ANY wire serialize
        (a control qubit takes part in one gate at a time).

        weights maps gate kind -> cost (default 1 for every kind).  A
        zero-weight gate adds no cost but still propagates ordering.  This
        is the metric used to measure interpreter depth and to charge the
        homomorphic level budget.
        """
        when = [0] * self.n_wires
        best = 0
        for kind, ws in self.gates:
            cost = 1 if weights is None else weights.get(kind, 1)
            t = cost + max(when[w] for w in ws)
            for w in ws:
                when[w] = t
            if t > best:
                best = t
        return best

    def depth_dataflow(self) -> int:
        """Data-dependency depth, the analogue of BooleanCircuit.depth:
        reading a wire does not serialize later readers, so fanout is free.
        compile_reversible keeps this within K = 2 of the boolean depth."""
        when = [0] * self.n_wires
        best = 0
        for kind, ws in self.gates:
            t = 1 + max(when[w] for w in ws)
            when[ws[-1]] = t
            if t > best:
                best = t
        return best


def compile_reversible(c: BooleanCircuit) -> ReversibleCircuit:
    """Fresh-ancilla compilation; output wires hold the boolean outputs.

    Depth grows by at most K = 2: AND -> CCX, COPY -> CNOT, CONST1 -> X,
    XOR -> two CNOTs onto the shared target, NOT -> CNOT then X.
    """
    n = c.n_inputs
    rmap = list(range(n))  # boolean wire -> reversible wire
    gates = []
    next_wire = n
    for kind, ins, _out in c.gates:
        t = next_wire
        next_wire += 1
        if kind == "AND":
            if ins[0] == ins[1]:  # AND(a, a) = a
                gates.append(("CNOT", (rmap[ins[0]], t)))
            else:
                gates.append(("CCX", (rmap[ins[0]], rmap[ins[1]], t)))
        elif kind == "XOR":
            if ins[0] != ins[1]:  # XOR(a, a) = 0: ancilla already holds it
                gates.append(("CNOT", (rmap[ins[0]], t)))
                gates.append(("CNOT", (rmap[ins[1]], t)))
        elif kind == "NOT":
            gates.append(("CNOT", (rmap[ins[0]], t)))
            gates.append(("X", (t,)))
        elif kind == "COPY":
            gates.append(("CNOT", (rmap[ins[0]], t)))
        elif kind == "CONST1":
            gates.append(("X", (t,)))
        # CONST0: the fresh ancilla is already 0
        rmap.append(t)
    outs = tuple(rmap[w] for w in c.output_wires)
    return ReversibleCircuit(n, next_wire, tuple(gates), outs)


class LevelProgram:
    """Vectorized replay schedule for a classical circuit.

    Gates are packed into levels that touch pairwise disjoint wires, so a
    level runs as a few fancy-indexed numpy column assignments over a
    (rows, n_wires) uint8 matrix.  One program serves any number of rows
    and is bit-identical to the scalar interpreters; only the order of
    independent gates differs.
    """

    __slots__ = ("n_wires", "n_inputs", "output_wires", "_base", "_out_idx", "_levels")

    def __init__(self, n_wires, n_inputs, output_wires, base, levels):
        self.n_wires = n_wires
        self.n_inputs = n_inputs
        self.output_wires = tuple(output_wires)
        self._base = base
        self._out_idx = np.asarray(self.output_wires, dtype=np.intp)
        self._levels = levels

    @staticmethod
    def _pack(raw):
        levels = []
        for groups in raw:
            entries = []
            for kind, rows in groups.items():
                cols = tuple(np.asarray(col, dtype=np.intp) for col in zip(*rows))
                entries.append((kind, *cols))
            levels.append(tuple(entries))
        return tuple(levels)

    @classmethod
    def from_boolean(cls, c: BooleanCircuit) -> "LevelProgram":
        """Dataflow schedule: a gate lands one level past its deepest input.

        SSA makes same-level outputs distinct and inputs strictly older,
        so column ops within a level never alias.  CONST gates preload a
        base row at level 0.
        """
        base = np.zeros(c.n_wires, dtype=np.uint8)
        level_of = [0] * c.n_wires
        raw = []
        for kind, ins, out in c.gates:
            if kind == "CONST1":
                base[out] = 1
                continue
            if kind == "CONST0":
                continue
            t = 1 + max(level_of[w] for w in ins)
            level_of[out] = t
            while len(raw) < t:
                raw.append({})
            raw[t - 1].setdefault(kind, []).append((*ins, out))
        return cls(c.n_wires, c.n_inputs, c.output_wires, base, cls._pack(raw))

    @classmethod
    def from_ops(cls, n_wires: int, ops) -> "LevelProgram":
        """Physical schedule for quantum op lists restricted to the basis.

        Ops sharing any wire serialize onto distinct levels.  X, CNOT and
        CCX are applied; Z, MEASURE and INIT0 fix every diagonal state
        and are dropped, matching the mixture interpreter.
        """
        when = [0] * n_wires
        raw = []
        for kind, ws in ops:
            if kind in ("Z", "MEASURE", "INIT0"):
                continue
            if kind not in ("X", "CNOT", "CCX"):
                raise ValueError(f"op {kind!r} has no classical batch form")
            t = 1 + max(when[w] for w in ws)
            for w in ws:
                when[w] = t
            while len(raw) < t:
                raw.append({})
            raw[t - 1].setdefault(kind, []).append(tuple(ws))
        return cls(n_wires, n_wires, (), None, cls._pack(raw))

    def run_batch(self, mat: np.ndarray) -> np.ndarray:
        """Apply the schedule in place to a (rows, n_wires) uint8 matrix."""
        for entries in self._levels:
            for entry in entries:
                kind = entry[0]
                if kind == "AND":
                    _, a, b, o = entry
                    mat[:, o] = mat[:, a] & mat[:, b]
                elif kind == "XOR":
                    _, a, b, o = entry
                    mat[:, o] = mat[:, a] ^ mat[:, b]
                elif kind == "NOT":
                    _, a, o = entry
                    mat[:, o] = mat[:, a] ^ 1
                elif kind == "COPY":
                    _, a, o = entry
                    mat[:, o] = mat[:, a]
                elif kind == "CNOT":
                    _, cw, t = entry
                    mat[:, t] ^= mat[:, cw]
                elif kind == "CCX":
                    _, a, b, t = entry
                    mat[:, t] ^= mat[:, a] & mat[:, b]
                else:  # X
                    _, t = entry
                    mat[:, t] ^= 1
        return mat

    def eval_batch(self, inputs) -> np.ndarray:
        """Boolean entry point: (rows, n_inputs) bits -> (rows, n_outputs)."""
        if self._base is None:
            raise TypeError("op-list programs run on full-width matrices via run_batch")
        rows = np.asarray(inputs, dtype=np.uint8)
        if rows.ndim != 2 or rows.shape[1] != self.n_inputs:
            raise ValueError("expected a (rows, n_inputs) bit matrix")
        mat = np.tile(self._base, (rows.shape[0], 1))
        mat[:, : self.n_inputs] = rows
        self.run_batch(mat)
        return mat[:, self._out_idx]


# ---------------------------------------------------------------------------
# Random circuit corpus helpers (tests and benchmarks).
# ---------------------------------------------------------------------------


def random_circuit(rng, n_inputs: int, n_gates: int, n_outputs: int) -> BooleanCircuit:
    kinds = ("AND", "XOR", "NOT", "COPY", "CONST0", "CONST1")
    gates = []
    for i in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        avail = n_inputs + i
        if avail == 0:
            kind = "CONST1" if rng.integers(2) else "CONST0"
        ins = tuple(int(rng.integers(avail)) for _ in range(GATE_ARITY[kind]))
        gates.append((kind, ins, n_inputs + i))
    n_wires = n_inputs + n_gates
    outs = tuple(int(rng.integers(n_wires)) for _ in range(n_outputs))
    return BooleanCircuit(n_inputs, n_outputs, tuple(gates), outs)


def random_circuit_exact_depth(rng, n_inputs: int, depth: int, n_outputs: int = 1) -> BooleanCircuit:
    """Random circuit whose depth() is exactly `depth` (a dependency chain
    of binary gates plus random side gates)."""
    if n_inputs < 1:
        raise ValueError("need at least one input")
    gates = []

    def emit(kind, *ins):
        out = n_inputs + len(gates)
        gates.append((kind, tuple(ins), out))
        return out

    spine = 0
    for _ in range(depth):
        other = int(rng.integers(n_inputs + len(gates)))
        kind = "AND" if rng.integers(2) else "XOR"
        spine = emit(kind, spine, other)
    for _ in range(max(0, depth - 1)):
        emit("NOT", int(rng.integers(n_inputs)))  # depth 1, never extends the spine
    n_wires = n_inputs + len(gates)
    outs = [spine] + [int(rng.integers(n_wires)) for _ in range(n_outputs - 1)]
    c = BooleanCircuit(n_inputs, n_outputs, tuple(gates), tuple(outs))
    assert c.depth() == depth or depth == 0
    return c
