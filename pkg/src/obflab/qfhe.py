"""Quantum homomorphic layer: one-time-padded states with encrypted pad keys.

A quantum ciphertext is X^a Z^b applied qubit-wise to the message state,
with a and b encrypted bit-wise under the classical backend.  States that
are (close to) computational-basis states convert losslessly to a fully
classical tuple (m xor a, Enc(a), Enc(b)) and back, which is what lets a
classical attack pipeline cross in and out of the quantum layer.

Evaluation runs on two paths.  Circuits built from {X, Z, CNOT} need no
plaintext access: the gate acts on the padded state and the pad keys are
updated homomorphically (CNOT costs one level for its key XOR).  Anything
with H, CCX or MEASURE routes through the sealed backend: decrypt the
pads inside the seal, simulate in the clear, re-pad and re-encrypt at
level floor - charged depth.  Both paths charge the same metric: Paulis
are free, every other gate costs one level of the chain budget.

A quantum payload is consumed by evaluation: qeval may leave the logical
output in superposition with its input register, so no copy of the input
survives and the object refuses further use.  Callers that need the
input afterwards must order qeval last.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fhe as F
from . import prf as P
from .errors import DepthExceededError, KeyMismatchError, NotClassicalError
from .fhe import Ciphertext, PublicKey, SecretKey
from .qsim import (
    MAX_DENSITY_QUBITS,
    BasisMixture,
    DensityMatrix,
    QuantumCircuit,
    StateVector,
    run,
)

BASIS_TOL = 1e-6

# level cost per gate: Pauli frame relabelings are free, everything that
# touches pad keys homomorphically or crosses the seal costs one
CHARGED_WEIGHT = {"X": 0, "Z": 0, "INIT0": 0, "CNOT": 1, "H": 1, "CCX": 1, "MEASURE": 1}

_PAULI_ONLY = {"X", "Z", "CNOT", "INIT0"}

_XOR2 = None  # built lazily to avoid import-order knots


def charged_depth(circuit: QuantumCircuit) -> int:
    """Longest weighted wire chain; the levels one qeval of this circuit costs."""
    lvl = [0] * circuit.n_qubits
    for kind, ws in circuit.ops:
        t = max(lvl[w] for w in ws) + CHARGED_WEIGHT[kind]
        for w in ws:
            lvl[w] = t
    return max(lvl, default=0)


@dataclass
class QCiphertext:
    """X^a Z^b padded state plus per-qubit (Enc(a), Enc(b))."""

    padded: object
    pad_cts: tuple
    consumed: bool = field(default=False, compare=False)

    def __post_init__(self):
        if len(self.pad_cts) != self.padded.n_qubits:
            raise ValueError("one pad-key pair per message qubit required")
        for pair in self.pad_cts:
            if len(pair) != 2 or not all(isinstance(c, Ciphertext) for c in pair):
                raise ValueError("pad keys are (Enc(a), Enc(b)) ciphertext pairs")

    @property
    def n_qubits(self) -> int:
        return self.padded.n_qubits


@dataclass(frozen=True)
class ClassicalQCiphertext:
    """Fully classical form of a basis-state quantum ciphertext."""

    masked: tuple  # m xor a, one bit per qubit
    pad_cts: tuple

    def __post_init__(self):
        masked = tuple(int(b) for b in self.masked)
        if any(b not in (0, 1) for b in masked):
            raise ValueError("masked bits must be 0/1")
        if len(self.pad_cts) != len(masked):
            raise ValueError("one pad-key pair per masked bit required")
        object.__setattr__(self, "masked", masked)

    def to_bytes(self) -> bytes:
        out = P.bits_to_bytes(self.masked)
        for ca, cb in self.pad_cts:
            out += ca.to_bytes() + cb.to_bytes()
        return out

    def to_quantum(self) -> QCiphertext:
        return QCiphertext(BasisMixture.basis(self.masked), self.pad_cts)


def classical_qct_from_bytes(data: bytes) -> ClassicalQCiphertext:
    n = 0
    while (n + 7) // 8 + 2 * F.CT_BYTES * n < len(data):
        n += 1
    head = (n + 7) // 8
    if head + 2 * F.CT_BYTES * n != len(data):
        raise ValueError("length matches no qubit count")
    masked = P.bytes_to_bits(data[:head], n)
    cts = F.cts_from_bytes(data[head:])
    return ClassicalQCiphertext(
        tuple(masked), tuple((cts[2 * i], cts[2 * i + 1]) for i in range(n))
    )


# -- pad application -----------------------------------------------------------


def _pad_circuit(n: int, a, b, inverse: bool) -> QuantumCircuit:
    xs = [("X", (i,)) for i in range(n) if a[i]]
    zs = [("Z", (i,)) for i in range(n) if b[i]]
    ops = xs + zs if inverse else zs + xs  # (X^a Z^b)^-1 = X^a then Z^b
    return QuantumCircuit(n, tuple(ops))


def _apply_pad(state, a, b, inverse: bool):
    """X^a Z^b (or its inverse) applied to a state.

    Basis mixtures skip the circuit: Z fixes every diagonal state, so the
    pad is one vectorized XOR of a into the branch bits.
    """
    if isinstance(state, BasisMixture):
        if len(a) != state.n_qubits:
            raise ValueError("pad width does not match the state")
        mat = np.array([bits for _, bits in state.branches], dtype=np.uint8)
        mat = mat.reshape(len(state.branches), state.n_qubits)
        mat ^= np.asarray(a, dtype=np.uint8)
        probs = [p for p, _ in state.branches]
        return BasisMixture(state.n_qubits, tuple((p, row) for p, row in zip(probs, mat)))
    return run(_pad_circuit(state.n_qubits, a, b, inverse), state)


def _basis_bits(state, tol: float):
    """Bits of the dominant basis state, or None if no point carries 1-tol."""
    if isinstance(state, BasisMixture):
        p, bits = max(state.branches)
        return tuple(bits) if p >= 1.0 - tol else None
    if isinstance(state, StateVector):
        probs = state.probs()
    elif isinstance(state, DensityMatrix):
        probs = state.probs()
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    k = int(np.argmax(probs))
    if probs[k] < 1.0 - tol:
        return None
    return tuple((k >> i) & 1 for i in range(state.n_qubits))


def _spend(qc: QCiphertext) -> None:
    if qc.consumed:
        raise ValueError("quantum payload was already consumed")
    qc.consumed = True


def _peek(qc: QCiphertext) -> None:
    if qc.consumed:
        raise ValueError("quantum payload was already consumed")


# -- encryption / decryption ----------------------------------------------------


def qenc(pk: PublicKey, psi, rng=None) -> QCiphertext:
    """Fresh uniformly random pads per qubit; pad keys encrypted under pk.

    psi: a quantum state, or a bit sequence taken as a basis state.
    """
    rng = np.random.default_rng() if rng is None else rng
    if isinstance(psi, (tuple, list)):
        psi = BasisMixture.basis(psi)
    n = psi.n_qubits
    a = [int(x) for x in rng.integers(0, 2, size=n)]
    b = [int(x) for x in rng.integers(0, 2, size=n)]
    padded = _apply_pad(psi, a, b, inverse=False)
    cts = F.enc(pk, a + b, rng)
    return QCiphertext(padded, tuple((cts[i], cts[n + i]) for i in range(n)))


def qdec(sk: SecretKey, qc) -> object:
    """Invert the pad; classical ciphertexts decrypt without touching states."""
    if isinstance(qc, ClassicalQCiphertext):
        a = F.dec(sk, [p[0] for p in qc.pad_cts])
        F.dec(sk, [p[1] for p in qc.pad_cts])  # authenticate the b pads too
        return BasisMixture.basis(tuple(t ^ ai for t, ai in zip(qc.masked, a)))
    _peek(qc)
    a = F.dec(sk, [p[0] for p in qc.pad_cts])
    b = F.dec(sk, [p[1] for p in qc.pad_cts])
    return _apply_pad(qc.padded, a, b, inverse=True)


# -- classical <-> quantum conversion -------------------------------------------


def promote(cts) -> QCiphertext:
    """Classical ciphertexts lifted to a quantum ciphertext of the same bits.

    The padded register is |0...0> and the given ciphertexts become the
    X-pad keys (a := m, masked bit 0), so decryption returns m without
    any quantum work.  The Z-pad slots get deterministic encryptions of 0
    at the same level, minted by the sealed backend; they carry no
    information anyone with the public key could not produce.
    """
    cts = list(cts)
    if not cts:
        raise ValueError("nothing to promote")
    kid = cts[0].kid
    if any(ct.kid != kid for ct in cts):
        raise KeyMismatchError("promoted bits must share one key")
    secret = F._secret_for_kid(kid)
    pairs = []
    for ct in cts:
        nonce = P.prf_hash(b"zpad-zero/" + ct.to_bytes(), 16)[:4]
        zct = F._encrypt_group(secret, kid, [0], ct.level, nonce)[0]
        pairs.append((ct, zct))
    return QCiphertext(BasisMixture.basis((0,) * len(cts)), tuple(pairs))


def to_classical(qc: QCiphertext, tol: float = BASIS_TOL) -> ClassicalQCiphertext:
    _peek(qc)
    bits = _basis_bits(qc.padded, tol)
    if bits is None:
        raise NotClassicalError("padded state is not near a basis state")
    return ClassicalQCiphertext(bits, qc.pad_cts)


def _measure_all(state, rng) -> tuple:
    if isinstance(state, BasisMixture):
        return state.sample(rng)
    probs = np.asarray(state.probs(), dtype=float)
    k = int(rng.choice(len(probs), p=probs / probs.sum()))
    return tuple((k >> i) & 1 for i in range(state.n_qubits))


def demote(qc: QCiphertext, tol: float = BASIS_TOL, rng=None) -> list:
    """Classical ciphertexts decrypting to the same bits as qc.

    The masked bit is absorbed into the X-pad ciphertext: where it is 0
    the pad key ciphertext already decrypts to the message bit and passes
    through byte-identical; where it is 1 the sealed backend re-encrypts
    the flipped bit at the same level (deterministic nonce, so demotion
    is reproducible).  Z pads are discarded with the quantum register.

    A payload that is genuinely far from every basis state has no
    lossless classical form.  Given an rng the register is measured in
    the computational basis instead (spending the payload, since the
    superposition is destroyed) and the sampled outcome demotes as above;
    without one that case raises NotClassicalError.
    """
    _peek(qc)
    bits = _basis_bits(qc.padded, tol)
    if bits is None:
        if rng is None:
            raise NotClassicalError("padded state is not near a basis state")
        bits = _measure_all(qc.padded, rng)
        _spend(qc)
    cqc = ClassicalQCiphertext(bits, qc.pad_cts)
    out = []
    for t, (ca, _) in zip(cqc.masked, cqc.pad_cts):
        if t == 0:
            out.append(ca)
            continue
        secret = F._secret_for_kid(ca.kid)
        a = F.dec(SecretKey(secret, ca.kid), [ca])[0]
        nonce = P.prf_hash(b"demote-flip/" + ca.to_bytes(), 16)[:4]
        out.append(F._encrypt_group(secret, ca.kid, [a ^ 1], ca.level, nonce)[0])
    return out


# -- homomorphic evaluation ------------------------------------------------------


def _xor_pair(pk: PublicKey, x: Ciphertext, y: Ciphertext, rng) -> Ciphertext:
    global _XOR2
    if _XOR2 is None:
        from .circuits import BooleanCircuit

        _XOR2 = BooleanCircuit(2, 1, (("XOR", (0, 1), 2),), (2,))
    return F.eval_circuit(pk, _XOR2, [x, y], rng)[0]


def _enc_at_level(secret, kid, bits, level, rng) -> list:
    return F._encrypt_groups(secret, kid, bits, level, F._group_nonces(len(bits), rng))


def _run_adaptive(circuit: QuantumCircuit, state):
    # BasisMixture handles MEASURE natively but not H; dense states handle
    # H natively but statevectors not MEASURE.  Densify when small enough.
    if isinstance(state, BasisMixture):
        if any(k == "H" for k, _ in circuit.ops) and circuit.n_qubits <= MAX_DENSITY_QUBITS:
            state = state.to_density_matrix()
    elif isinstance(state, StateVector) and circuit.has_measure():
        if circuit.n_qubits <= MAX_DENSITY_QUBITS:
            state = state.to_density_matrix()
    return run(circuit, state)


def qeval(pk: PublicKey, circuit: QuantumCircuit, qc: QCiphertext, rng=None, path="auto") -> QCiphertext:
    """Homomorphic run of circuit on qc; costs charged_depth(circuit) levels.

    path selects the machinery ("pauli" only for {X, Z, CNOT} circuits);
    "auto" uses the Pauli key-update path whenever it suffices.  The input
    payload is consumed: its register may end up entangled with the
    output, so the object cannot be used again.
    """
    if len(circuit.input_wires) != qc.n_qubits:
        raise ValueError("circuit input width does not match the ciphertext")
    kinds = {k for k, _ in circuit.ops}
    if path == "auto":
        path = "pauli" if kinds <= _PAULI_ONLY else "sealed"
    elif path == "pauli" and not kinds <= _PAULI_ONLY:
        raise ValueError("pauli path admits only {X, Z, CNOT} circuits")
    elif path not in ("pauli", "sealed"):
        raise ValueError(f"unknown path {path!r}")
    for ca, cb in qc.pad_cts:
        if ca.kid != pk.kid or cb.kid != pk.kid:
            raise KeyMismatchError("pad keys were not encrypted under this key")
    floor = min(ct.level for pair in qc.pad_cts for ct in pair)
    need = charged_depth(circuit)
    if need > floor:
        raise DepthExceededError(f"charged depth {need} exceeds remaining budget {floor}")
    rng = np.random.default_rng() if rng is None else rng
    _spend(qc)

    if path == "pauli":
        cta, ctb = {}, {}
        for w, (ca, cb) in zip(circuit.input_wires, qc.pad_cts):
            cta[w], ctb[w] = ca, cb
        for w in circuit.init0_wires:
            z = F.enc(pk, [0, 0], rng)
            cta[w], ctb[w] = z[0], z[1]
        for kind, ws in circuit.ops:
            if kind == "CNOT":
                c, t = ws
                # CNOT (X^ac Z^bc o X^at Z^bt) = (X^ac Z^(bc^bt) o X^(ac^at) Z^bt) CNOT
                new_bc = _xor_pair(pk, ctb[c], ctb[t], rng)
                new_at = _xor_pair(pk, cta[t], cta[c], rng)
                ctb[c], cta[t] = new_bc, new_at
        padded = run(circuit, qc.padded)
        return QCiphertext(padded, tuple((cta[w], ctb[w]) for w in range(circuit.n_qubits)))

    kid = pk.kid
    secret = F._secret_for_kid(kid)
    sk = SecretKey(secret, kid)
    a = F.dec(sk, [p[0] for p in qc.pad_cts])
    b = F.dec(sk, [p[1] for p in qc.pad_cts])
    plain = _apply_pad(qc.padded, a, b, inverse=True)
    state = _run_adaptive(circuit, plain)
    n = circuit.n_qubits
    a2 = [int(x) for x in rng.integers(0, 2, size=n)]
    b2 = [int(x) for x in rng.integers(0, 2, size=n)]
    padded = _apply_pad(state, a2, b2, inverse=False)
    cts = _enc_at_level(secret, kid, a2 + b2, floor - need, rng)
    return QCiphertext(padded, tuple((cts[i], cts[n + i]) for i in range(n)))


def qrestrict(qc: QCiphertext, wires) -> QCiphertext:
    """Keep only the listed payload wires, in the listed order.

    The discarded register is traced out, so the input is consumed: what
    remains may have been entangled with what was thrown away.  Pad key
    pairs follow their wires.  Statevector payloads densify when small
    enough; mixtures restrict at any width.
    """
    wires = tuple(int(w) for w in wires)
    if not wires:
        raise ValueError("nothing kept")
    if len(set(wires)) != len(wires):
        raise ValueError("duplicate wire")
    for w in wires:
        if not 0 <= w < qc.n_qubits:
            raise ValueError(f"wire {w} out of range")
    _peek(qc)
    st = qc.padded
    if isinstance(st, BasisMixture):
        sub = st.marginal(wires)
    else:
        if isinstance(st, StateVector):
            if st.n_qubits > MAX_DENSITY_QUBITS:
                raise TypeError("cannot trace a statevector payload this wide")
            st = st.to_density_matrix()
        kept = st.trace_out([w for w in range(st.n_qubits) if w not in wires])
        order = sorted(wires)
        # permute the survivors (increasing order after the trace) into
        # the requested order
        idx = np.arange(1 << len(wires))
        old = np.zeros_like(idx)
        for j, w in enumerate(wires):
            old |= ((idx >> j) & 1) << order.index(w)
        sub = DensityMatrix(len(wires), kept.matrix[np.ix_(old, old)])
    _spend(qc)
    return QCiphertext(sub, tuple(qc.pad_cts[w] for w in wires))


def qtensor(x: QCiphertext, y: QCiphertext) -> QCiphertext:
    """Join two payloads into one ciphertext; both inputs are consumed."""
    _peek(x)
    _peek(y)
    sx, sy = x.padded, y.padded
    if type(sx) is not type(sy) or isinstance(sx, StateVector):
        if isinstance(sx, StateVector) and isinstance(sy, StateVector):
            joined = StateVector(
                sx.n_qubits + sy.n_qubits, np.kron(sy.amplitudes, sx.amplitudes)
            )
            _spend(x)
            _spend(y)
            return QCiphertext(joined, x.pad_cts + y.pad_cts)
        if sx.n_qubits + sy.n_qubits > MAX_DENSITY_QUBITS:
            raise TypeError("cannot join differing state representations at this width")
        sx, sy = sx.to_density_matrix(), sy.to_density_matrix()
    _spend(x)
    _spend(y)
    return QCiphertext(sx.tensor(sy), x.pad_cts + y.pad_cts)
