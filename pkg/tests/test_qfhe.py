"""Quantum layer: pad round trips, classical conversion, homomorphic eval.

The two evaluation paths (Pauli key update vs sealed decrypt-simulate-
reencrypt) are cross-validated on Clifford circuits, and the charged
depth metric is pinned against the reversible-circuit metric it must
agree with for the budget arithmetic elsewhere to mean anything.
"""

import numpy as np
import pytest

import obflab.fhe as F
import obflab.qfhe as Q
import obflab.qsim as S
from obflab.circuits import compile_reversible, random_circuit
from obflab.errors import DepthExceededError, KeyMismatchError, NotClassicalError
from obflab.fhe import FheParams, RandomTape
from obflab.qsim import BasisMixture, DensityMatrix, QuantumCircuit, StateVector


def _kp(seed=1, lam=6, d=8):
    r = RandomTape.random(lam, np.random.default_rng(seed))
    return F.keygen(FheParams(lam, d), r)


class _ZeroRng:
    """Forces a = b = 0 pad draws (and zero nonces)."""

    def integers(self, lo, hi=None, size=None):
        return np.zeros(size, dtype=np.int64)


def _sv(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector(n, v / np.linalg.norm(v))


def test_zero_pads_leave_state_alone():
    kp = _kp()
    psi = _sv(3, 2)
    qc = Q.qenc(kp.pk, psi, _ZeroRng())
    assert np.allclose(qc.padded.amplitudes, psi.amplitudes)
    bits = F.dec(kp.sk, [c for pair in qc.pad_cts for c in pair])
    assert bits == [0, 0, 0, 0]


def test_basis_roundtrip_exact():
    kp = _kp(2)
    rng = np.random.default_rng(0)
    for bits in [(0, 1), (1, 1, 0, 1), (0,)]:
        qc = Q.qenc(kp.pk, bits, rng)
        out = Q.qdec(kp.sk, qc)
        assert out.branches == ((1.0, tuple(bits)),)


def test_statevector_roundtrips():
    kp = _kp(3)
    rng = np.random.default_rng(1)
    plus = StateVector(1, np.array([1, 1]) / np.sqrt(2))
    states = [StateVector.basis([0]), StateVector.basis([1]), plus, _sv(7, 3)]
    for psi in states:
        out = Q.qdec(kp.sk, Q.qenc(kp.pk, psi, rng))
        assert S.trace_distance(out, psi) <= 1e-9


def test_qdec_wrong_key():
    kp, other = _kp(4), _kp(5)
    qc = Q.qenc(kp.pk, (0, 1), np.random.default_rng(2))
    with pytest.raises(KeyMismatchError):
        Q.qdec(other.sk, qc)


def test_padded_marginal_near_maximally_mixed():
    # averaged over the pad draw, the padded qubit shows nothing of psi
    kp = _kp(6)
    rng = np.random.default_rng(3)
    for psi in [DensityMatrix.basis([0]), StateVector(1, np.array([1, 1]) / np.sqrt(2))]:
        acc = np.zeros((2, 2), dtype=complex)
        for _ in range(200):
            padded = Q.qenc(kp.pk, psi, rng).padded
            if isinstance(padded, StateVector):
                padded = padded.to_density_matrix()
            acc += padded.matrix
        acc /= 200
        dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(acc - np.eye(2) / 2)))
        assert dist <= 0.05


def test_promote_is_the_zero_padded_lift():
    kp = _kp(7)
    rng = np.random.default_rng(4)
    for bits in [(1,), (0,), (1, 0, 1, 1)]:
        cts = F.enc(kp.pk, bits, rng)
        qp = Q.promote(cts)
        assert qp.padded.branches == ((1.0, (0,) * len(bits)),)
        for ct, (ca, cb) in zip(cts, qp.pad_cts):
            assert ca.to_bytes() == ct.to_bytes()  # given ct becomes the X pad
            assert F.dec(kp.sk, [cb]) == [0]
        out = Q.qdec(kp.sk, qp)
        assert out.branches == ((1.0, tuple(bits)),)


def test_promote_deterministic():
    kp = _kp(8)
    cts = F.enc(kp.pk, (1, 0, 1), np.random.default_rng(5))
    a = Q.promote(cts)
    b = Q.promote(cts)
    assert [
        (x.to_bytes(), y.to_bytes()) for x, y in a.pad_cts
    ] == [(x.to_bytes(), y.to_bytes()) for x, y in b.pad_cts]


def test_demote_promote_identity_bytes():
    kp = _kp(9)
    cts = F.enc(kp.pk, (1, 1, 0, 0, 1), np.random.default_rng(6))
    back = Q.demote(Q.promote(cts))
    assert [c.to_bytes() for c in back] == [c.to_bytes() for c in cts]


def test_demote_of_encrypted_basis_state():
    kp = _kp(10)
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        bits = tuple(int(b) for b in rng.integers(0, 2, size=4))
        qc = Q.qenc(kp.pk, bits, rng)
        cts = Q.demote(qc)
        assert tuple(F.dec(kp.sk, cts)) == bits


def test_demote_rejects_superposition():
    kp = _kp(11)
    plus = StateVector(1, np.array([1, 1]) / np.sqrt(2))
    qc = Q.qenc(kp.pk, plus, np.random.default_rng(7))
    with pytest.raises(NotClassicalError):
        Q.demote(qc)


def test_classical_form_serialization():
    kp = _kp(12)
    qc = Q.qenc(kp.pk, (1, 0, 1, 1, 0, 1, 0, 1, 1), np.random.default_rng(8))
    cqc = Q.to_classical(qc)
    back = Q.classical_qct_from_bytes(cqc.to_bytes())
    assert back.masked == cqc.masked
    assert back.to_bytes() == cqc.to_bytes()
    assert Q.qdec(kp.sk, back).branches == Q.qdec(kp.sk, qc).branches
    with pytest.raises(ValueError):
        Q.classical_qct_from_bytes(cqc.to_bytes() + b"\x00")


def test_x_gate_leaves_pad_keys_alone():
    kp = _kp(13)
    qc = Q.qenc(kp.pk, (0,), np.random.default_rng(9))
    before = [(a.to_bytes(), b.to_bytes()) for a, b in qc.pad_cts]
    out = Q.qeval(kp.pk, QuantumCircuit(1, (("X", (0,)),)), qc)
    after = [(a.to_bytes(), b.to_bytes()) for a, b in out.pad_cts]
    assert after == before
    assert Q.qdec(kp.sk, out).branches == ((1.0, (1,)),)


def test_cnot_homomorphic():
    kp = _kp(14)
    c = QuantumCircuit(2, (("CNOT", (0, 1)),))
    for bits, want in [((1, 0), (1, 1)), ((0, 1), (0, 1)), ((1, 1), (1, 0))]:
        qc = Q.qenc(kp.pk, bits, np.random.default_rng(10))
        out = Q.qeval(kp.pk, c, qc)
        assert Q.qdec(kp.sk, out).branches == ((1.0, want),)
        # the key XOR costs exactly one level on the touched keys
        assert out.pad_cts[1][0].level == kp.pk.params.d - 1
        assert out.pad_cts[0][1].level == kp.pk.params.d - 1
        assert out.pad_cts[0][0].level == kp.pk.params.d


def test_payload_is_consumed():
    kp = _kp(15)
    qc = Q.qenc(kp.pk, (0, 1), np.random.default_rng(11))
    c = QuantumCircuit(2, (("X", (0,)),))
    out = Q.qeval(kp.pk, c, qc)
    with pytest.raises(ValueError):
        Q.qeval(kp.pk, c, qc)
    with pytest.raises(ValueError):
        Q.qdec(kp.sk, qc)
    with pytest.raises(ValueError):
        Q.demote(qc)
    assert Q.qdec(kp.sk, out) is not None


def test_paths_agree_on_clifford_circuits():
    kp = _kp(16)
    c = QuantumCircuit(
        3,
        (("X", (0,)), ("CNOT", (0, 1)), ("Z", (1,)), ("CNOT", (1, 2)), ("X", (2,))),
    )
    for psi in [BasisMixture.basis((1, 0, 1)), _sv(21, 3)]:
        qa = Q.qenc(kp.pk, psi, np.random.default_rng(12))
        qb = Q.qenc(kp.pk, psi, np.random.default_rng(12))
        out_a = Q.qeval(kp.pk, c, qa, np.random.default_rng(13), path="pauli")
        out_b = Q.qeval(kp.pk, c, qb, np.random.default_rng(14), path="sealed")
        da, db = Q.qdec(kp.sk, out_a), Q.qdec(kp.sk, out_b)
        assert S.trace_distance(da, db) <= 1e-9


def test_pauli_path_rejects_nonclifford():
    kp = _kp(17)
    qc = Q.qenc(kp.pk, (1, 0, 0), np.random.default_rng(15))
    c = QuantumCircuit(3, (("CCX", (0, 1, 2)),))
    with pytest.raises(ValueError):
        Q.qeval(kp.pk, c, qc, path="pauli")


def test_budget_enforced_before_any_work():
    kp = _kp(18, d=2)
    chain = QuantumCircuit(2, (("CNOT", (0, 1)),) * 3)
    qc = Q.qenc(kp.pk, (1, 0), np.random.default_rng(16))
    assert Q.charged_depth(chain) == 3
    with pytest.raises(DepthExceededError):
        Q.qeval(kp.pk, chain, qc)
    assert not qc.consumed  # rejection must not eat the payload
    ok = Q.qeval(kp.pk, QuantumCircuit(2, (("CNOT", (0, 1)),) * 2), qc)
    assert Q.qdec(kp.sk, ok).branches == ((1.0, (1, 0)),)


def test_sealed_output_levels():
    kp = _kp(19, d=5)
    c = QuantumCircuit(
        3, (("H", (0,)), ("CCX", (0, 1, 2)), ("MEASURE", (0,)), ("X", (1,)))
    )
    q = Q.charged_depth(c)
    assert q == 3
    qc = Q.qenc(kp.pk, DensityMatrix.basis((0, 1, 0)), np.random.default_rng(17))
    out = Q.qeval(kp.pk, c, qc, np.random.default_rng(18))
    levels = {ct.level for pair in out.pad_cts for ct in pair}
    assert levels == {5 - q}


def test_homomorphic_correctness_corpus():
    # random {X, Z, H, CNOT, CCX, MEASURE} circuits vs plain channel runs
    kp = _kp(20, d=8)
    gates = ("X", "Z", "H", "CNOT", "CCX", "MEASURE")
    for seed in range(12):
        rng = np.random.default_rng(300 + seed)
        n = int(rng.integers(2, 5))
        ops = []
        while len(ops) < 8:
            kind = gates[rng.integers(len(gates))]
            ws = tuple(int(w) for w in rng.permutation(n)[: S.QGATE_ARITY[kind]])
            if len(ws) < S.QGATE_ARITY[kind]:
                continue
            trial = QuantumCircuit(n, tuple(ops) + ((kind, ws),))
            if Q.charged_depth(trial) > kp.pk.params.d:
                break
            ops.append((kind, ws))
        c = QuantumCircuit(n, tuple(ops))
        psi = DensityMatrix(n, _sv(600 + seed, n).to_density_matrix().matrix)
        want = S.run(c, psi)
        qc = Q.qenc(kp.pk, psi, rng)
        got = Q.qdec(kp.sk, Q.qeval(kp.pk, c, qc, rng))
        assert S.trace_distance(got, want) <= 1e-6


def test_classical_circuits_through_the_quantum_layer():
    # compiled reversible circuits (the interpreter's gate diet) round-trip
    for seed in range(8):
        rng = np.random.default_rng(400 + seed)
        bc = random_circuit(rng, 5, 12, 3)
        rev = compile_reversible(bc)
        qcirc = S.from_reversible(rev)
        q = Q.charged_depth(qcirc)
        kp = _kp(700 + seed, d=q)
        x = tuple(int(b) for b in rng.integers(0, 2, size=5))
        qc = Q.qenc(kp.pk, x, rng)
        out = Q.qeval(kp.pk, qcirc, qc, rng)
        # the physical metric is conservative: levels never go negative,
        # and the sealed path (any CCX present) lands exactly on 0
        levels = [ct.level for p in out.pad_cts for ct in p]
        assert min(levels) >= 0
        if any(kind == "CCX" for kind, _ in qcirc.ops):
            assert set(levels) == {0}
        cts = Q.demote(out)
        got = F.dec(kp.sk, [cts[w] for w in qcirc.output_wires])
        assert got == bc.eval(list(x))


def test_charged_depth_matches_reversible_metric():
    weights = {"X": 0, "CNOT": 1, "CCX": 1}
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        bc = random_circuit(rng, 4, 15, 2)
        rev = compile_reversible(bc)
        assert Q.charged_depth(S.from_reversible(rev)) == rev.depth(weights)


def test_qtensor_joins_payloads():
    kp = _kp(22)
    rng = np.random.default_rng(19)
    qa = Q.qenc(kp.pk, (1, 0), rng)
    qb = Q.promote(F.enc(kp.pk, (1, 1), rng))
    joined = Q.qtensor(qa, qb)
    assert Q.qdec(kp.sk, joined).branches == ((1.0, (1, 0, 1, 1)),)
    with pytest.raises(ValueError):
        Q.qdec(kp.sk, qa)  # consumed by the join


def test_qeval_rejects_foreign_pads():
    kp, other = _kp(23), _kp(24)
    qc = Q.qenc(kp.pk, (0, 1), np.random.default_rng(20))
    with pytest.raises(KeyMismatchError):
        Q.qeval(other.pk, QuantumCircuit(2, (("X", (0,)),)), qc)


# -- restriction ----------------------------------------------------------------


def test_qrestrict_keeps_wires_in_requested_order():
    kp = _kp(40)
    rng = np.random.default_rng(40)
    qc = Q.qenc(kp.pk, (1, 0, 1, 1), rng)
    pads = qc.pad_cts
    sub = Q.qrestrict(qc, (3, 0, 2))
    assert sub.n_qubits == 3
    assert sub.pad_cts == (pads[3], pads[0], pads[2])
    out = Q.qdec(kp.sk, sub)
    assert out.branches == ((1.0, (1, 1, 1)),)
    assert qc.consumed
    with pytest.raises(ValueError):
        Q.qrestrict(qc, (0,))  # already consumed


def test_qrestrict_marginalizes_mixtures():
    kp = _kp(41)
    mix = BasisMixture(3, ((0.5, (0, 0, 1)), (0.5, (1, 1, 1))))
    qc = Q.qenc(kp.pk, mix, _ZeroRng())
    sub = Q.qrestrict(qc, (1,))
    assert Q.qdec(kp.sk, sub).branches == ((0.5, (0,)), (0.5, (1,)))


def test_qrestrict_dense_traces_entanglement():
    kp = _kp(42)
    bell = StateVector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
    qc = Q.qenc(kp.pk, bell, _ZeroRng())
    sub = Q.qrestrict(qc, (0,))
    rho = Q.qdec(kp.sk, sub)
    assert isinstance(rho, DensityMatrix)
    assert np.allclose(rho.matrix, np.eye(2) / 2)


def test_qrestrict_dense_respects_order():
    kp = _kp(43)
    psi = _sv(44, 3)
    qc = Q.qenc(kp.pk, psi, _ZeroRng())
    sub = Q.qrestrict(qc, (2, 0))
    rho = Q.qdec(kp.sk, sub)
    full = psi.to_density_matrix()
    want = full.trace_out([1])  # wires (0, 2), increasing
    # requested order (2, 0) swaps the two surviving wires
    perm = [0, 2, 1, 3]
    assert np.allclose(rho.matrix, want.matrix[np.ix_(perm, perm)])


def test_qrestrict_validates_wires():
    kp = _kp(45)
    rng = np.random.default_rng(45)
    qc = Q.qenc(kp.pk, (1, 0), rng)
    with pytest.raises(ValueError):
        Q.qrestrict(qc, ())
    with pytest.raises(ValueError):
        Q.qrestrict(qc, (0, 0))
    with pytest.raises(ValueError):
        Q.qrestrict(qc, (2,))
    assert not qc.consumed  # failed restriction spends nothing


# -- measuring demotion ----------------------------------------------------------


def test_demote_measures_mixtures_with_rng():
    kp = _kp(46)
    mix = BasisMixture(2, ((0.5, (0, 1)), (0.5, (1, 0))))
    qc = Q.qenc(kp.pk, mix, np.random.default_rng(46))
    with pytest.raises(NotClassicalError):
        Q.demote(qc)
    seen = set()
    for seed in range(12):
        qc2 = Q.qenc(kp.pk, mix, np.random.default_rng(46))
        cts = Q.demote(qc2, rng=np.random.default_rng(seed))
        assert qc2.consumed
        seen.add(tuple(F.dec(kp.sk, cts)))
    assert seen == {(0, 1), (1, 0)}


def test_demote_measurement_distribution():
    kp = _kp(47)
    mix = BasisMixture(1, ((0.25, (0,)), (0.75, (1,))))
    rng = np.random.default_rng(47)
    ones = 0
    for _ in range(400):
        qc = Q.qenc(kp.pk, mix, np.random.default_rng(48))
        ones += F.dec(kp.sk, Q.demote(qc, rng=rng))[0]
    assert 250 <= ones <= 340  # 3 sigma around 300


def test_demote_near_basis_ignores_rng_and_peeks():
    kp = _kp(49)
    rng = np.random.default_rng(49)
    qc = Q.qenc(kp.pk, (1, 0, 1), rng)
    a = Q.demote(qc)
    b = Q.demote(qc, rng=np.random.default_rng(0))  # still repeatable
    assert F.cts_to_bytes(a) == F.cts_to_bytes(b)
    assert not qc.consumed
