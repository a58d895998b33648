"""Black-box access with exact bookkeeping.

The other side of the experiment: instead of an obfuscated state, the
distinguisher gets an oracle.  Handles here count every classical and
superposition query and keep a replayable transcript, so experiments can
state exactly how much access a simulator consumed.

Three layers build on the handles.  choice_adapt is the two-for-one
simulation: an oracle for f(b, x) = c if b = 0 else g(x) built from a
g-oracle and the constant, spending exactly two g-queries per f-query
(superposition queries run the five-step circuit: g, a b-controlled XOR
of the scratch register, X on b, a b-controlled XOR of c, X on b, g).
compose_adapters stacks that idea into a full member-interface oracle
from nothing but the bare point/zero oracle and explicit auxiliary
inputs, which is how query-bounded simulators are run at widths far past
the circuit templates.  BASELINES holds the simulators themselves, and
o2h_extract implements the measure-a-random-query extractor that turns
any distinguishing advantage into a point-recovery frequency.

Counts only move through query and squery; everything else is read-only
by convention (transcripts are plain lists, but mutating one falsifies
your own experiment, not the oracle).
"""

from __future__ import annotations

import json

import numpy as np

from . import ccobf
from . import families as FAM
from . import fhe as F
from . import keyblocks as KB
from . import prf as P
from .circuits import BooleanCircuit, LevelProgram, build_function
from .qsim import (
    MAX_STATEVECTOR_QUBITS,
    BasisMixture,
    DensityMatrix,
    StateVector,
)


def _pack(bits) -> str:
    return P.bits_to_bytes([int(b) for b in bits]).hex()


def _unpack(hexstr: str, n: int) -> tuple:
    return tuple(P.bytes_to_bits(bytes.fromhex(hexstr), n))


class _Counted:
    """Query accounting and transcript shared by every oracle flavor."""

    def __init__(self, n_inputs: int, n_outputs: int, name: str = ""):
        self.n_inputs = int(n_inputs)
        self.n_outputs = int(n_outputs)
        self.name = str(name)
        self._log: list = []

    @property
    def classical_queries(self) -> int:
        return sum(1 for row in self._log if row["mode"] == "c")

    @property
    def superposition_queries(self) -> int:
        return sum(1 for row in self._log if row["mode"] == "q")

    @property
    def total_queries(self) -> int:
        return len(self._log)

    @property
    def transcript(self) -> tuple:
        return tuple(self._log)

    def transcript_jsonl(self) -> str:
        return "\n".join(json.dumps(row, sort_keys=True) for row in self._log)

    def classical_rows(self):
        """Decoded (x bits, y bits) pairs of the classical queries so far."""
        for row in self._log:
            if row["mode"] == "c":
                yield _unpack(row["x"], self.n_inputs), _unpack(row["y"], self.n_outputs)

    def _sanswer(self, state, x_wires, z_wires):
        return _map_state(state, lambda rows: _xor_rows(self, rows, x_wires, z_wires))


class OracleHandle(_Counted):
    """Counting oracle for one boolean circuit."""

    def __init__(self, circuit: BooleanCircuit, name: str = ""):
        super().__init__(circuit.n_inputs, circuit.n_outputs, name)
        self.circuit = circuit
        self._program = LevelProgram.from_boolean(circuit)

    def _answer_batch(self, rows: np.ndarray) -> np.ndarray:
        return self._program.eval_batch(rows)

    def _answer(self, bits) -> tuple:
        out = self._answer_batch(np.array([bits], dtype=np.uint8))[0]
        return tuple(int(v) for v in out)


def zero_oracle(lam: int) -> OracleHandle:
    from .circuits import FunctionSpec

    return OracleHandle(build_function(FunctionSpec("ZERO", lam)), name=f"zero@{lam}")


def point_oracle(alpha, beta) -> OracleHandle:
    from .circuits import FunctionSpec

    spec = FunctionSpec("MULTIBIT_POINT", len(alpha), tuple(alpha), tuple(beta))
    return OracleHandle(build_function(spec), name=f"point@{len(alpha)}")


# ---------------------------------------------------------------------------
# Query entry points.  All counting happens here.
# ---------------------------------------------------------------------------


def query(h, x) -> tuple:
    """Classical query: y = f(x), one count, one transcript row."""
    bits = tuple(int(v) for v in x)
    if len(bits) != h.n_inputs or any(b not in (0, 1) for b in bits):
        raise ValueError(f"query wants {h.n_inputs} bits")
    y = h._answer(bits)
    h._log.append({"i": len(h._log), "mode": "c", "x": _pack(bits), "y": _pack(y)})
    return y


def squery(h, state, x_wires=None, z_wires=None):
    """Superposition query: |x>|z> -> |x>|z xor f(x)> on the named wires.

    By default the state is exactly the (x, z) register pair.  Explicit
    wire lists let adapters embed the oracle inside a larger register;
    statevectors and density matrices apply the map as a basis
    permutation, mixtures apply it branch by branch.
    """
    m, n = h.n_inputs, h.n_outputs
    x_wires = tuple(range(m)) if x_wires is None else tuple(int(w) for w in x_wires)
    z_wires = tuple(range(m, m + n)) if z_wires is None else tuple(int(w) for w in z_wires)
    if len(x_wires) != m or len(z_wires) != n:
        raise ValueError("wire lists must match the oracle arity")
    k = state.n_qubits
    seen = set(x_wires) | set(z_wires)
    if len(seen) != m + n or any(not 0 <= w < k for w in seen):
        raise ValueError("oracle wires must be distinct and in range")
    if x_wires == tuple(range(m)) and z_wires == tuple(range(m, m + n)) and k != m + n:
        raise ValueError(f"state must be on exactly {m + n} qubits")
    out = h._sanswer(state, x_wires, z_wires)
    h._log.append({"i": len(h._log), "mode": "q", "n": k})
    return out


def _xor_rows(h, rows: np.ndarray, x_wires, z_wires) -> np.ndarray:
    ys = h._answer_batch(np.ascontiguousarray(rows[:, x_wires]))
    new = rows.copy()
    new[:, z_wires] ^= ys
    return new


def _map_state(state, bitmap):
    """Apply a classical reversible map, given as a function on uint8 bit
    rows, to any supported state representation."""
    if isinstance(state, BasisMixture):
        rows = np.array([bits for _, bits in state.branches], dtype=np.uint8)
        new = bitmap(rows)
        return BasisMixture(
            state.n_qubits,
            tuple(
                (p, tuple(int(v) for v in new[i]))
                for i, (p, _) in enumerate(state.branches)
            ),
        )
    k = state.n_qubits
    if k > MAX_STATEVECTOR_QUBITS:
        raise ValueError("dense states stop at the statevector limit")
    idx = np.arange(1 << k, dtype=np.int64)
    rows = np.empty((idx.size, k), dtype=np.uint8)
    for w in range(k):
        rows[:, w] = (idx >> w) & 1
    mapped = bitmap(rows).astype(np.int64)
    perm = np.zeros(idx.size, dtype=np.int64)
    for w in range(k):
        perm |= mapped[:, w] << w
    # every map here is a layer of XOR flips, hence its own inverse
    if isinstance(state, StateVector):
        return StateVector(k, state.amplitudes[perm])
    return DensityMatrix(k, state.matrix[np.ix_(perm, perm)])


# ---------------------------------------------------------------------------
# The choice-oracle simulation.
# ---------------------------------------------------------------------------


class ChoiceOracleAdapter(_Counted):
    """Oracle for f(b, x) = c if b = 0 else g(x), from a g-oracle.

    Every f-query costs exactly two g-queries, in both modes: the inner
    oracle computes into a scratch register and uncomputes it afterwards,
    whether or not b selected it.  The middle of the circuit XORs either
    the scratch register or the constant into the output register under
    control of b; the X's conjugating the second layer flip the control
    sense, nothing more, so the map is applied in that collapsed form.
    """

    def __init__(self, g, c):
        self.g = g
        self.c = tuple(int(v) for v in c)
        if len(self.c) != g.n_outputs or any(b not in (0, 1) for b in self.c):
            raise ValueError("constant must be a g-output-width bit string")
        super().__init__(1 + g.n_inputs, g.n_outputs, name=f"choice({g.name})")

    def _answer(self, bits) -> tuple:
        b, x = bits[0], bits[1:]
        y = query(self.g, x)
        query(self.g, x)  # uncompute; the cost is paid either way
        return y if b == 1 else self.c

    def _answer_batch(self, rows: np.ndarray) -> np.ndarray:
        out = np.empty((rows.shape[0], self.n_outputs), dtype=np.uint8)
        for i in range(rows.shape[0]):
            out[i] = self._answer(tuple(int(v) for v in rows[i]))
        return out

    def _sanswer(self, state, x_wires, z_wires):
        b_wire, gx_wires = x_wires[0], x_wires[1:]
        n, k = self.n_outputs, state.n_qubits
        w_wires = tuple(range(k, k + n))
        ext = _extend_zero(state, n)
        ext = squery(self.g, ext, x_wires=gx_wires, z_wires=w_wires)
        c_arr = np.array(self.c, dtype=np.uint8)

        def middle(rows: np.ndarray) -> np.ndarray:
            sel = rows[:, [b_wire]]
            flips = sel * rows[:, w_wires] ^ (1 - sel) * c_arr[None, :]
            new = rows.copy()
            new[:, z_wires] ^= flips
            return new

        ext = _map_state(ext, middle)
        ext = squery(self.g, ext, x_wires=gx_wires, z_wires=w_wires)
        return _shrink_zero(ext, k)


def _extend_zero(state, n: int):
    if isinstance(state, BasisMixture):
        return state.tensor(BasisMixture.basis((0,) * n))
    if isinstance(state, StateVector):
        amps = np.zeros(1 << (state.n_qubits + n), dtype=complex)
        amps[: state.amplitudes.size] = state.amplitudes
        return StateVector(state.n_qubits + n, amps)
    return state.tensor(DensityMatrix.basis((0,) * n))


def _shrink_zero(state, k: int):
    """Drop trailing ancilla wires that returned to |0>."""
    if isinstance(state, BasisMixture):
        for _, bits in state.branches:
            if any(bits[k:]):
                raise ValueError("scratch register did not uncompute")
        return BasisMixture(k, tuple((p, bits[:k]) for p, bits in state.branches))
    if isinstance(state, StateVector):
        rest = state.amplitudes[1 << k :]
        if float(np.vdot(rest, rest).real) > 1e-18:
            raise ValueError("scratch register did not uncompute")
        return StateVector(k, state.amplitudes[: 1 << k])
    return state.trace_out(range(k, state.n_qubits))


def choice_adapt(g, c) -> ChoiceOracleAdapter:
    """f-oracle for f(b, x) = c if b = 0 else g(x), two g-queries each."""
    return ChoiceOracleAdapter(g, c)


# ---------------------------------------------------------------------------
# Full member-interface composition.
# ---------------------------------------------------------------------------


class MemberInterfaceOracle(_Counted):
    """The four-branch member interface built from explicit inputs.

    Choice 0 answers the auxiliary row, choice 1 row i answers key block
    i (bottom past the last one), choice 2 routes to the wrapped point or
    zero oracle verbatim, choice 3 answers bottom.  Row layouts match the
    circuit family bit for bit, so a transcript against this oracle is
    indistinguishable from one against a real member.
    """

    def __init__(self, point, lam: int, alpha_ct, o, blocks):
        self.point = point
        self.lam = int(lam)
        if point.n_inputs != self.lam or point.n_outputs != self.lam:
            raise ValueError("inner oracle must map lam bits to lam bits")
        n_pay = 8 * FAM.aux_len_bytes(self.lam)
        super().__init__(2 + self.lam, 1 + n_pay, name=f"member({point.name})")
        aux_bits = P.bytes_to_bits(F.cts_to_bytes(alpha_ct) + o.to_bytes())
        if len(aux_bits) != n_pay:
            raise ValueError("auxiliary material has the wrong width")
        self._aux_row = (1,) + tuple(aux_bits)
        self._block_rows = []
        for i, blk in enumerate(blocks):
            if blk.index != i:
                raise ValueError("blocks must arrive as rows 0..K")
            body = P.bytes_to_bits(blk.body.ljust(F.BLOCK_BYTES, b"\x00"))
            self._block_rows.append((1,) + tuple(body) + (0,) * (n_pay - len(body)))
        self._bottom = (0,) * (1 + n_pay)

    def _answer(self, bits) -> tuple:
        b = bits[0] + 2 * bits[1]
        x = bits[2:]
        if b == 0:
            return self._aux_row
        if b == 1:
            i = sum(bit << j for j, bit in enumerate(x))
            return self._block_rows[i] if i < len(self._block_rows) else self._bottom
        if b == 2:
            value = query(self.point, x)
            return (1,) + tuple(value) + (0,) * (self.n_outputs - 1 - len(value))
        return self._bottom

    def _answer_batch(self, rows: np.ndarray) -> np.ndarray:
        out = np.empty((rows.shape[0], self.n_outputs), dtype=np.uint8)
        for i in range(rows.shape[0]):
            out[i] = self._answer(tuple(int(v) for v in rows[i]))
        return out


def compose_adapters(point, lam: int, alpha_ct, o, blocks) -> MemberInterfaceOracle:
    """Member-interface oracle from the bare oracle plus explicit inputs.

    Any algorithm written against the full interface runs against this
    instead, consuming only point-oracle queries; the other branches are
    answered from (alpha_ct, o, blocks, bottom) without any oracle at all.
    """
    return MemberInterfaceOracle(point, lam, alpha_ct, o, blocks)


def composed_member_oracle(kind: str, lam: int, d: int, alpha, beta, r):
    """One experiment arm: the composed oracle and its auxiliary info.

    Point and zero arms built from the same (alpha, beta, r) share every
    coin, including the auxiliary material, exactly like paired members.
    """
    alpha_ct, cap = FAM.sample_D_r(alpha, d, r, beta=beta)
    pk = F.keygen(F.FheParams(lam, d), r).pk
    aux = FAM.AuxInfo(pk, alpha_ct, cap)
    spec, _ = FAM.build_aux_member_v4(kind, alpha, beta, aux)
    inner = OracleHandle(build_function(spec), name=f"{kind.lower()}@{lam}")
    blocks = KB.sim_blocks(lam, pk, "bootstrapped")
    return compose_adapters(inner, lam, alpha_ct, cap, blocks), aux


# ---------------------------------------------------------------------------
# Baseline simulators and the extraction experiment.
# ---------------------------------------------------------------------------


def _probe_hits(oracle, v: int) -> bool:
    lam = oracle.n_inputs - 2
    out = query(oracle, list(FAM.choice_bits(2)) + P.int_to_bits(v, lam))
    return any(out[1 : 1 + lam])


def sim_random(oracle, aux, budget: int, rng) -> int:
    """Coin flip; the floor every simulator must beat."""
    return int(rng.integers(0, 2))


def sim_exhaustive(oracle, aux, budget: int, rng) -> int:
    """Probe `budget` distinct inputs; say point iff any value is nonzero."""
    lam = oracle.n_inputs - 2
    space = 1 << lam
    if budget >= space:
        probes = range(space)
    else:
        probes = (int(v) for v in rng.choice(space, size=budget, replace=False))
    return int(any(_probe_hits(oracle, v) for v in probes))


def sim_replay(oracle, aux, budget: int, rng) -> int:
    """Probe points derived from the encrypted input's own bytes.

    Without the key the ciphertext bytes are just noise, so this fares no
    better than random probing; it exists to witness that fact.
    """
    lam = oracle.n_inputs - 2
    space = 1 << lam
    data = F.cts_to_bytes(aux.alpha_ct)
    probes: list = []
    seen: set = set()
    ctr = 0
    while len(probes) < min(budget, space) and ctr < 4 * budget + 16:
        word = P.prf_hash(b"replay-probe/" + data + ctr.to_bytes(4, "big"), 8)
        v = int.from_bytes(word, "big") % space
        ctr += 1
        if v not in seen:
            seen.add(v)
            probes.append(v)
    return int(any(_probe_hits(oracle, v) for v in probes))


BASELINES = {
    "random": sim_random,
    "exhaustive": sim_exhaustive,
    "replay": sim_replay,
}


def o2h_extract(sim, oracle, aux, budget: int, rng) -> tuple:
    """Run sim against the oracle and output one of its own point-branch
    query inputs, chosen uniformly (a fresh uniform guess if it made
    none).  Against the zero oracle this measures how often the simulator
    already knew where to look, which caps its distinguishing advantage.
    """
    lam = oracle.n_inputs - 2
    start = oracle.total_queries
    sim(oracle, aux, budget, rng)
    xs = []
    for row in oracle.transcript[start:]:
        if row["mode"] != "c":
            continue
        bits = _unpack(row["x"], oracle.n_inputs)
        if bits[0] + 2 * bits[1] == 2:
            xs.append(bits[2:])
    if not xs:
        return tuple(int(v) for v in rng.integers(0, 2, size=lam))
    return xs[int(rng.integers(len(xs)))]
