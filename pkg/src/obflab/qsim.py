"""Dense quantum simulation in little-endian wire order.

Three state representations share one gate set.  StateVector holds pure
states up to 22 qubits, DensityMatrix holds mixed states up to 10 qubits
with exact channel semantics, and BasisMixture holds classical
probability distributions over basis states at any width, which is what
the wide interpreter runs use where dense arrays are hopeless.  Bit i of
a flat array index is wire i, so amplitudes[5] multiplies |...101> read
with wire 0 rightmost.

MEASURE is the non-selective computational-basis channel (dephasing), so
run() stays a deterministic map on density matrices; sampling happens
only in the explicitly seeded helpers.  make_coherent defers each
measurement through a CNOT onto a fresh record wire.  That deferral is
what makes input recovery work: run the unitary part, copy the output
register into a fresh register, run the inverse, and the machine hands
its input back along with the copied output.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .circuits import BooleanCircuit, LevelProgram, ReversibleCircuit, compile_reversible
from .errors import NotClassicalError

MAX_STATEVECTOR_QUBITS = 22
MAX_DENSITY_QUBITS = 10

QGATE_ARITY = {"X": 1, "Z": 1, "H": 1, "CNOT": 2, "CCX": 3, "MEASURE": 1, "INIT0": 1}

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class QuantumCircuit:
    """Gate list over {X, Z, H, CNOT, CCX, MEASURE, INIT0}.

    Wires carrying INIT0 are ancillas born in |0>; every other wire is an
    input wire.  run() takes a state on the input wires only and returns
    one on all wires.  output_wires is bookkeeping for circuits that
    compute something: it marks the register input recovery copies out.
    """

    n_qubits: int
    ops: tuple
    output_wires: tuple = ()

    def __post_init__(self):
        used = set()
        for kind, ws in self.ops:
            if kind not in QGATE_ARITY or len(ws) != QGATE_ARITY[kind]:
                raise ValueError(f"bad op {kind} {ws}")
            if len(set(ws)) != len(ws):
                raise ValueError("op wires must be distinct")
            for w in ws:
                if not 0 <= w < self.n_qubits:
                    raise ValueError(f"op wire {w} out of range")
            if kind == "INIT0" and ws[0] in used:
                raise ValueError("INIT0 on a wire that was already used")
            used.update(ws)
        for w in self.output_wires:
            if not 0 <= w < self.n_qubits:
                raise ValueError(f"output wire {w} out of range")

    @cached_property
    def init0_wires(self) -> tuple:
        return tuple(ws[0] for kind, ws in self.ops if kind == "INIT0")

    @cached_property
    def input_wires(self) -> tuple:
        init = set(self.init0_wires)
        return tuple(w for w in range(self.n_qubits) if w not in init)

    def has_measure(self) -> bool:
        return any(kind == "MEASURE" for kind, _ in self.ops)


@dataclass(frozen=True)
class CoherentUnitary:
    """Measurement-free unitary form of a circuit.

    base contains only gates from {X, Z, H, CNOT, CCX}.  cnot_targets are
    the fresh record wires that absorbed deferred measurements, in the
    order the measurements appeared; aux_inputs lists every wire the
    caller must supply as |0> (the original ancillas plus the records).
    """

    base: QuantumCircuit
    cnot_targets: tuple
    aux_inputs: tuple

    def __post_init__(self):
        for kind, _ in self.base.ops:
            if kind in ("MEASURE", "INIT0"):
                raise ValueError("coherent form must be purely unitary")

    def inverse_ops(self) -> tuple:
        # every gate in the set is its own inverse
        return tuple(reversed(self.base.ops))


# ---------------------------------------------------------------------------
# States.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits > MAX_STATEVECTOR_QUBITS:
            raise ValueError(f"statevectors stop at {MAX_STATEVECTOR_QUBITS} qubits")
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude count must be 2^n_qubits")
        if abs(float(np.vdot(amp, amp).real) - 1.0) > 1e-9:
            raise ValueError("squared norm must be 1")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def basis(cls, bits) -> "StateVector":
        bits = [int(b) for b in bits]
        amp = np.zeros(1 << len(bits), dtype=complex)
        amp[sum(b << i for i, b in enumerate(bits))] = 1.0
        return cls(len(bits), amp)

    def probs(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.n_qubits > MAX_DENSITY_QUBITS:
            raise ValueError(f"density matrices stop at {MAX_DENSITY_QUBITS} qubits")
        m = np.asarray(self.matrix, dtype=complex)
        n = 1 << self.n_qubits
        if m.shape != (n, n):
            raise ValueError("matrix must be 2^n by 2^n")
        if float(np.max(np.abs(m - m.conj().T))) > 1e-9:
            raise ValueError("matrix must be Hermitian")
        if abs(float(np.trace(m).real) - 1.0) > 1e-9:
            raise ValueError("trace must be 1")
        if float(np.linalg.eigvalsh(m)[0]) < -1e-9:
            raise ValueError("matrix must be positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def basis(cls, bits) -> "DensityMatrix":
        return StateVector.basis(bits).to_density_matrix()

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        """Joint state with other's wires stacked above self's."""
        return DensityMatrix(self.n_qubits + other.n_qubits, np.kron(other.matrix, self.matrix))

    def trace_out(self, wires) -> "DensityMatrix":
        drop = sorted(set(wires))
        keep = [w for w in range(self.n_qubits) if w not in set(drop)]
        kmap = _spread_map(keep)
        emap = _spread_map(drop)
        rows = (kmap[:, None] + emap[None, :]).ravel()
        sub = self.matrix[np.ix_(rows, rows)]
        sub = sub.reshape(len(kmap), len(emap), len(kmap), len(emap))
        return DensityMatrix(len(keep), np.einsum("aebe->ab", sub))

    def probs(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))


@dataclass(frozen=True)
class BasisMixture:
    """Probability distribution over computational-basis states.

    Exactly represents any diagonal density matrix with few support
    points, at any number of qubits.  Branches are canonicalized on
    construction: bits coerced to 0/1 tuples, duplicates merged, zero
    probabilities dropped, sorted by bit pattern.
    """

    n_qubits: int
    branches: tuple  # ((prob, bits), ...)

    def __post_init__(self):
        merged = {}
        for p, bits in self.branches:
            if isinstance(bits, np.ndarray) and bits.ndim == 1 and bits.dtype.kind in "iu":
                # wide interpreter rows come in as uint8 vectors
                if bits.shape[0] != self.n_qubits or ((bits != 0) & (bits != 1)).any():
                    raise ValueError("branch bits must be 0/1 at circuit width")
                bits = tuple(bits.tolist())
            else:
                bits = tuple(int(b) for b in bits)
                if len(bits) != self.n_qubits or any(b not in (0, 1) for b in bits):
                    raise ValueError("branch bits must be 0/1 at circuit width")
            p = float(p)
            if p < -1e-12:
                raise ValueError("negative branch probability")
            if p > 0.0:
                merged[bits] = merged.get(bits, 0.0) + p
        if abs(sum(merged.values()) - 1.0) > 1e-9:
            raise ValueError("branch probabilities must sum to 1")
        object.__setattr__(self, "branches", tuple((merged[b], b) for b in sorted(merged)))

    @classmethod
    def basis(cls, bits) -> "BasisMixture":
        return cls(len(tuple(bits)), ((1.0, tuple(bits)),))

    def sample(self, rng) -> tuple:
        probs = np.array([p for p, _ in self.branches])
        i = int(rng.choice(len(self.branches), p=probs / probs.sum()))
        return self.branches[i][1]

    def measure(self, wires, rng) -> tuple:
        """Computational-basis measurement of the listed wires: samples an
        outcome and returns (outcome bits, conditioned posterior)."""
        groups: dict = {}
        for p, bits in self.branches:
            key = tuple(bits[w] for w in wires)
            groups.setdefault(key, []).append((p, bits))
        keys = sorted(groups)
        weights = np.array([sum(p for p, _ in groups[k]) for k in keys])
        i = int(rng.choice(len(keys), p=weights / weights.sum()))
        total = float(weights[i])
        post = BasisMixture(self.n_qubits, tuple((p / total, b) for p, b in groups[keys[i]]))
        return keys[i], post

    def marginal(self, wires) -> "BasisMixture":
        wires = tuple(wires)
        return BasisMixture(
            len(wires), tuple((p, tuple(bits[w] for w in wires)) for p, bits in self.branches)
        )

    def tensor(self, other: "BasisMixture") -> "BasisMixture":
        pairs = [
            (p * q, b1 + b2) for p, b1 in self.branches for q, b2 in other.branches
        ]
        return BasisMixture(self.n_qubits + other.n_qubits, tuple(pairs))

    def deterministic_bits(self):
        """The single support point, or None if the state is genuinely mixed."""
        return self.branches[0][1] if len(self.branches) == 1 else None

    def to_density_matrix(self) -> DensityMatrix:
        m = np.zeros((1 << self.n_qubits, 1 << self.n_qubits), dtype=complex)
        for p, bits in self.branches:
            m[sum(b << i for i, b in enumerate(bits)), sum(b << i for i, b in enumerate(bits))] = p
        return DensityMatrix(self.n_qubits, m)


def _spread_map(positions) -> np.ndarray:
    """Compact index -> full index with compact bit j placed at positions[j]."""
    idx = np.arange(1 << len(positions), dtype=np.int64)
    out = np.zeros(len(idx), dtype=np.int64)
    for j, p in enumerate(positions):
        out += ((idx >> j) & 1) << p
    return out


# ---------------------------------------------------------------------------
# Gate application on flat arrays: one implementation serves statevectors
# (k = 1 column), full unitary matrices (k = 2^n columns) and density-matrix
# sides.
# ---------------------------------------------------------------------------


def _perm_map(n, kind, ws) -> np.ndarray:
    idx = np.arange(1 << n)
    if kind == "X":
        return idx ^ (1 << ws[0])
    if kind == "CNOT":
        c, t = ws
        return idx ^ (((idx >> c) & 1) << t)
    a, b, t = ws
    return idx ^ (((idx >> a) & (idx >> b) & 1) << t)


def _apply_left(arr, n, kind, ws) -> np.ndarray:
    if kind in ("X", "CNOT", "CCX"):
        return arr[_perm_map(n, kind, ws)]
    if kind == "Z":
        sign = 1.0 - 2.0 * ((np.arange(1 << n) >> ws[0]) & 1)
        return arr * sign[:, None]
    w = ws[0]  # H
    v = arr.reshape(1 << (n - w - 1), 2, 1 << w, arr.shape[1])
    out = np.empty_like(v)
    out[:, 0] = v[:, 0] + v[:, 1]
    out[:, 1] = v[:, 0] - v[:, 1]
    return (out / _SQRT2).reshape(arr.shape)


def _apply_unitary_dm(rho, n, kind, ws) -> np.ndarray:
    left = _apply_left(rho, n, kind, ws)  # U rho
    return _apply_left(left.conj().T, n, kind, ws).conj().T  # (U (U rho)^dag)^dag


def _dephase_dm(rho, n, w) -> np.ndarray:
    bit = (np.arange(1 << n) >> w) & 1
    return rho * (bit[:, None] == bit[None, :])


# ---------------------------------------------------------------------------
# run() and friends.
# ---------------------------------------------------------------------------


def run(c: QuantumCircuit, state):
    """Apply the circuit to a state on its input wires; the result covers
    all wires, with INIT0 ancillas folded in as |0>.  Dispatches on the
    state representation; BasisMixture admits only classical circuits."""
    if isinstance(state, BasisMixture):
        return _run_mixture(c, state)
    if isinstance(state, StateVector):
        return _run_statevector(c, state)
    if isinstance(state, DensityMatrix):
        return _run_density(c, state)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _check_input_width(c, state):
    if state.n_qubits != len(c.input_wires):
        raise ValueError(
            f"state has {state.n_qubits} qubits, circuit wants {len(c.input_wires)}"
        )


def _run_density(c: QuantumCircuit, state: DensityMatrix) -> DensityMatrix:
    _check_input_width(c, state)
    n = c.n_qubits
    imap = _spread_map(c.input_wires)
    rho = np.zeros((1 << n, 1 << n), dtype=complex)
    rho[np.ix_(imap, imap)] = state.matrix
    for kind, ws in c.ops:
        if kind == "INIT0":
            continue  # the embedding already put |0> there
        if kind == "MEASURE":
            rho = _dephase_dm(rho, n, ws[0])
        else:
            rho = _apply_unitary_dm(rho, n, kind, ws)
    return DensityMatrix(n, rho)


def _run_statevector(c: QuantumCircuit, state: StateVector) -> StateVector:
    _check_input_width(c, state)
    if c.has_measure():
        raise ValueError("MEASURE needs a DensityMatrix or BasisMixture state")
    n = c.n_qubits
    imap = _spread_map(c.input_wires)
    amp = np.zeros(1 << n, dtype=complex)
    amp[imap] = state.amplitudes
    arr = amp[:, None]
    for kind, ws in c.ops:
        if kind != "INIT0":
            arr = _apply_left(arr, n, kind, ws)
    return StateVector(n, arr[:, 0])


_MIX_PROG_MIN = 128  # ops; below this the scalar loop beats the schedule


def _run_mixture(c: QuantumCircuit, state: BasisMixture) -> BasisMixture:
    _check_input_width(c, state)
    mat = np.zeros((len(state.branches), c.n_qubits), dtype=np.uint8)
    mat[:, list(c.input_wires)] = np.array(
        [bits for _, bits in state.branches], dtype=np.uint8
    ).reshape(len(state.branches), -1)
    if len(c.ops) >= _MIX_PROG_MIN:
        prog = c.__dict__.get("_mix_prog")
        if prog is None:
            if any(kind == "H" for kind, _ in c.ops):
                raise NotClassicalError("H would leave the computational basis")
            prog = LevelProgram.from_ops(c.n_qubits, c.ops)
            object.__setattr__(c, "_mix_prog", prog)
        prog.run_batch(mat)
    else:
        for kind, ws in c.ops:
            if kind == "X":
                mat[:, ws[0]] ^= 1
            elif kind == "CNOT":
                mat[:, ws[1]] ^= mat[:, ws[0]]
            elif kind == "CCX":
                mat[:, ws[2]] ^= mat[:, ws[0]] & mat[:, ws[1]]
            elif kind == "H":
                raise NotClassicalError("H would leave the computational basis")
            # Z, MEASURE and INIT0 fix every diagonal state
    probs = [p for p, _ in state.branches]
    return BasisMixture(c.n_qubits, tuple((p, row) for p, row in zip(probs, mat)))


def make_coherent(c: QuantumCircuit) -> CoherentUnitary:
    """Deferred-measurement form: MEASURE(w) becomes CNOT from w onto a
    fresh record wire.  Dephase-and-trace the record wires after running
    the base and you get run(c, .) back exactly."""
    ops = []
    records = []
    for kind, ws in c.ops:
        if kind == "INIT0":
            continue
        if kind == "MEASURE":
            r = c.n_qubits + len(records)
            records.append(r)
            ops.append(("CNOT", (ws[0], r)))
        else:
            ops.append((kind, ws))
    base = QuantumCircuit(c.n_qubits + len(records), tuple(ops), c.output_wires)
    return CoherentUnitary(base, tuple(records), c.init0_wires + tuple(records))


def unitary_matrix(cu: CoherentUnitary) -> np.ndarray:
    """Dense matrix of the coherent unitary; capped like density matrices."""
    n = cu.base.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"dense unitaries stop at {MAX_DENSITY_QUBITS} qubits")
    arr = np.eye(1 << n, dtype=complex)
    for kind, ws in cu.base.ops:
        arr = _apply_left(arr, n, kind, ws)
    return arr


def input_recover_channel(c: QuantumCircuit, state: DensityMatrix) -> DensityMatrix:
    """Exact channel of the input-recovering run.

    Applies the coherent form, copies the declared output register into a
    fresh register Y with CNOTs, applies the inverse, measures Y, and
    traces out the measurement records.  Returns the joint state on
    (all original wires, then Y).  When the circuit's output is within
    trace distance eps of a basis state, this joint state is within
    2*sqrt(eps) of (input with |0> ancillas) tensor |x><x|.
    """
    if not c.output_wires:
        raise ValueError("circuit declares no output register")
    cu = make_coherent(c)
    nb = cu.base.n_qubits
    y = tuple(nb + i for i in range(len(c.output_wires)))
    ops = [("INIT0", (w,)) for w in (*cu.aux_inputs, *y)]
    ops += list(cu.base.ops)
    ops += [("CNOT", (o, yi)) for o, yi in zip(c.output_wires, y)]
    ops += list(cu.inverse_ops())
    ops += [("MEASURE", (yi,)) for yi in y]
    rec = QuantumCircuit(nb + len(y), tuple(ops), y)
    joint = run(rec, state)
    if cu.cnot_targets:
        joint = joint.trace_out(cu.cnot_targets)
    return joint  # wires 0..c.n_qubits-1, then Y


def input_recover_run(c: QuantumCircuit, state: DensityMatrix, rng=None):
    """Sampled input recovery: returns (state on the circuit's input wires
    conditioned on the sampled copy, outcome bits of the copied register)."""
    rng = np.random.default_rng() if rng is None else rng
    joint = input_recover_channel(c, state)
    n, m = c.n_qubits, len(c.output_wires)
    diag = np.clip(np.real(np.diag(joint.matrix)), 0.0, None)
    py = diag.reshape(1 << m, 1 << n).sum(axis=1)
    yv = int(rng.choice(1 << m, p=py / py.sum()))
    outcome = tuple((yv >> i) & 1 for i in range(m))
    sel = np.arange(1 << n) + (yv << n)
    block = joint.matrix[np.ix_(sel, sel)]
    cond = DensityMatrix(n, block / float(np.trace(block).real))
    if c.init0_wires:
        cond = cond.trace_out(c.init0_wires)
    return cond, outcome


def oracle_unitary(f: BooleanCircuit) -> CoherentUnitary:
    """Standard XOR oracle |x>|y> -> |x>|y + f(x)> as a clean unitary:
    compute reversibly, CNOT the result into y, uncompute."""
    rev = compile_reversible(f)
    n, m = f.n_inputs, f.n_outputs

    def shift(w):  # ancillas move above the y register
        return w if w < n else w + m

    fwd = [(kind, tuple(shift(w) for w in ws)) for kind, ws in rev.gates]
    copy = [("CNOT", (shift(o), n + i)) for i, o in enumerate(rev.output_wires)]
    ops = fwd + copy + list(reversed(fwd))
    n_total = rev.n_wires + m
    base = QuantumCircuit(n_total, tuple(ops), tuple(range(n, n + m)))
    return CoherentUnitary(base, (), tuple(range(n + m, n_total)))


def from_reversible(rev: ReversibleCircuit) -> QuantumCircuit:
    """Reversible circuit as a quantum circuit, ancillas declared INIT0."""
    ops = [("INIT0", (w,)) for w in range(rev.n_inputs, rev.n_wires)]
    ops += [(kind, ws) for kind, ws in rev.gates]
    return QuantumCircuit(rev.n_wires, tuple(ops), rev.output_wires)


def trace_distance(a, b) -> float:
    """Half the trace norm of the difference; exact in both representations."""
    if isinstance(a, StateVector):
        a = a.to_density_matrix()
    if isinstance(b, StateVector):
        b = b.to_density_matrix()
    if isinstance(a, BasisMixture) and isinstance(b, BasisMixture):
        if a.n_qubits != b.n_qubits:
            raise ValueError("dimension mismatch")
        pa = {bits: p for p, bits in a.branches}
        pb = {bits: p for p, bits in b.branches}
        return 0.5 * sum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in set(pa) | set(pb))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        if a.n_qubits != b.n_qubits:
            raise ValueError("dimension mismatch")
        return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))
    raise TypeError("trace_distance needs two states of comparable representation")
