"""Simulator checked against an independent dense-matrix oracle.

The oracle builds every gate as an explicit matrix by textbook bit
arithmetic and applies channels by matrix products, sharing no code with
the simulator under test.
"""

import numpy as np
import pytest

import obflab.circuits as C
import obflab.qsim as Q
from obflab.errors import NotClassicalError

# -- independent oracle ------------------------------------------------------

_H1 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _gate_matrix(n, kind, ws):
    size = 1 << n
    u = np.zeros((size, size), dtype=complex)
    for x in range(size):
        if kind == "X":
            u[x ^ (1 << ws[0]), x] = 1
        elif kind == "Z":
            u[x, x] = -1 if (x >> ws[0]) & 1 else 1
        elif kind == "CNOT":
            c, t = ws
            u[x ^ (((x >> c) & 1) << t), x] = 1
        elif kind == "CCX":
            a, b, t = ws
            u[x ^ ((((x >> a) & 1) & ((x >> b) & 1)) << t), x] = 1
        elif kind == "H":
            bit = (x >> ws[0]) & 1
            for nb in (0, 1):
                u[(x & ~(1 << ws[0])) | (nb << ws[0]), x] = _H1[nb, bit]
    return u


def _oracle_channel(n, ops, rho):
    for kind, ws in ops:
        if kind == "MEASURE":
            w = ws[0]
            p0 = np.diag([(1.0 - ((x >> w) & 1)) for x in range(1 << n)]).astype(complex)
            p1 = np.eye(1 << n, dtype=complex) - p0
            rho = p0 @ rho @ p0 + p1 @ rho @ p1
        else:
            u = _gate_matrix(n, kind, ws)
            rho = u @ rho @ u.conj().T
    return rho


def _random_density(rng, n):
    a = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    rho = a @ a.conj().T
    return Q.DensityMatrix(n, rho / np.trace(rho))


def _random_pure(rng, n):
    a = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return Q.StateVector(n, a / np.linalg.norm(a))


def _random_ops(rng, n, count, allow_measure=True):
    kinds = ["X", "Z", "H", "CNOT", "CCX"] + (["MEASURE"] if allow_measure else [])
    ops = []
    for _ in range(count):
        kind = kinds[int(rng.integers(len(kinds)))]
        arity = Q.QGATE_ARITY[kind]
        if arity > n:
            kind, arity = "X", 1
        ws = tuple(int(w) for w in rng.choice(n, size=arity, replace=False))
        ops.append((kind, ws))
    return tuple(ops)


# -- run() against the oracle ------------------------------------------------


def test_run_matches_dense_oracle():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3, 4):
        for _ in range(8):
            ops = _random_ops(rng, n, 12)
            circ = Q.QuantumCircuit(n, ops)
            rho = _random_density(rng, n)
            got = Q.run(circ, rho).matrix
            want = _oracle_channel(n, ops, rho.matrix)
            assert np.max(np.abs(got - want)) < 1e-9


def test_run_trivial_examples():
    rho = _random_density(np.random.default_rng(0), 2)
    same = Q.run(Q.QuantumCircuit(2, ()), rho)
    assert np.max(np.abs(same.matrix - rho.matrix)) < 1e-12

    flipped = Q.run(Q.QuantumCircuit(1, (("X", (0,)),)), Q.DensityMatrix.basis([0]))
    assert np.max(np.abs(flipped.matrix - Q.DensityMatrix.basis([1]).matrix)) < 1e-12

    mixed = Q.run(
        Q.QuantumCircuit(1, (("H", (0,)), ("MEASURE", (0,)))), Q.DensityMatrix.basis([0])
    )
    assert abs(mixed.matrix[0, 0] - 0.5) < 1e-12
    assert abs(mixed.matrix[1, 1] - 0.5) < 1e-12
    assert abs(mixed.matrix[0, 1]) < 1e-12


def test_statevector_path_matches_density_path():
    rng = np.random.default_rng(12)
    for _ in range(10):
        n = int(rng.integers(1, 5))
        ops = _random_ops(rng, n, 10, allow_measure=False)
        circ = Q.QuantumCircuit(n, ops)
        sv = _random_pure(rng, n)
        via_sv = Q.run(circ, sv).to_density_matrix()
        via_dm = Q.run(circ, sv.to_density_matrix())
        assert np.max(np.abs(via_sv.matrix - via_dm.matrix)) < 1e-9
    with pytest.raises(ValueError):
        Q.run(Q.QuantumCircuit(1, (("MEASURE", (0,)),)), Q.StateVector.basis([0]))


def test_init0_wires_are_zero_ancillas():
    # wire 1 is an ancilla: CNOT from it cannot flip the input wire
    circ = Q.QuantumCircuit(2, (("INIT0", (1,)), ("CNOT", (1, 0))))
    out = Q.run(circ, Q.DensityMatrix.basis([1]))
    assert np.max(np.abs(out.matrix - Q.DensityMatrix.basis([1, 0]).matrix)) < 1e-12
    # but after X on the ancilla it does
    circ2 = Q.QuantumCircuit(2, (("INIT0", (1,)), ("X", (1,)), ("CNOT", (1, 0))))
    out2 = Q.run(circ2, Q.DensityMatrix.basis([0]))
    assert np.max(np.abs(out2.matrix - Q.DensityMatrix.basis([1, 1]).matrix)) < 1e-12


def test_quantum_circuit_validation():
    with pytest.raises(ValueError):
        Q.QuantumCircuit(1, (("CNOT", (0, 0)),))  # duplicate wires
    with pytest.raises(ValueError):
        Q.QuantumCircuit(1, (("CNOT", (0, 1)),))  # out of range
    with pytest.raises(ValueError):
        Q.QuantumCircuit(1, (("FOO", (0,)),))
    with pytest.raises(ValueError):
        Q.QuantumCircuit(1, (("X", (0,)), ("INIT0", (0,))))  # init after use
    with pytest.raises(ValueError):
        Q.QuantumCircuit(2, (("X", (0,)),), output_wires=(5,))


def test_size_limits():
    with pytest.raises(ValueError):
        Q.StateVector(Q.MAX_STATEVECTOR_QUBITS + 1, np.zeros(8))
    with pytest.raises(ValueError):
        Q.DensityMatrix(Q.MAX_DENSITY_QUBITS + 1, np.eye(4))


# -- basis mixtures ----------------------------------------------------------


def test_basis_mixture_matches_density_on_classical_circuits():
    rng = np.random.default_rng(13)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        kinds = ["X", "CNOT", "CCX", "MEASURE"]
        ops = []
        for _ in range(15):
            kind = kinds[int(rng.integers(len(kinds)))]
            arity = Q.QGATE_ARITY[kind]
            if arity > n:
                kind, arity = "X", 1
            ops.append((kind, tuple(int(w) for w in rng.choice(n, size=arity, replace=False))))
        circ = Q.QuantumCircuit(n, tuple(ops))
        support = [tuple(int(b) for b in rng.integers(0, 2, size=n)) for _ in range(3)]
        weights = rng.dirichlet(np.ones(len(set(support))))
        mix = Q.BasisMixture(n, tuple(zip(weights, sorted(set(support)))))
        got = Q.run(circ, mix).to_density_matrix()
        want = Q.run(circ, mix.to_density_matrix())
        assert np.max(np.abs(got.matrix - want.matrix)) < 1e-9


def test_basis_mixture_rejects_superposition():
    with pytest.raises(NotClassicalError):
        Q.run(Q.QuantumCircuit(1, (("H", (0,)),)), Q.BasisMixture.basis([0]))


def test_basis_mixture_measure_and_marginal():
    mix = Q.BasisMixture(2, ((0.25, (0, 0)), (0.25, (1, 0)), (0.5, (1, 1))))
    outcome, post = mix.measure([1], np.random.default_rng(5))
    if outcome == (1,):
        assert post.branches == ((1.0, (1, 1)),)
    else:
        assert post.branches == ((0.5, (0, 0)), (0.5, (1, 0)))
    # measuring wire 0 splits 0.25 / 0.75: both outcomes occur across seeds
    seen = {out for out, _ in (mix.measure([0], np.random.default_rng(s)) for s in range(40))}
    assert seen == {(0,), (1,)}
    marg = mix.marginal([0])
    assert marg.branches == ((0.25, (0,)), (0.75, (1,)))
    both = Q.BasisMixture.basis([1]).tensor(Q.BasisMixture.basis([0, 1]))
    assert both.branches == ((1.0, (1, 0, 1)),)
    assert both.deterministic_bits() == (1, 0, 1)
    assert mix.deterministic_bits() is None


def test_basis_mixture_canonicalization():
    mix = Q.BasisMixture(1, ((0.5, (1,)), (0.25, (0,)), (0.25, (1,))))
    assert mix.branches == ((0.25, (0,)), (0.75, (1,)))
    with pytest.raises(ValueError):
        Q.BasisMixture(1, ((0.9, (0,)),))  # does not sum to 1
    with pytest.raises(ValueError):
        Q.BasisMixture(1, ((1.0, (2,)),))


# -- trace distance ----------------------------------------------------------


def test_trace_distance_closed_forms():
    zero = Q.DensityMatrix.basis([0])
    one = Q.DensityMatrix.basis([1])
    plus = Q.run(Q.QuantumCircuit(1, (("H", (0,)),)), zero)
    assert Q.trace_distance(zero, zero) == 0
    assert abs(Q.trace_distance(zero, one) - 1.0) < 1e-12
    assert abs(Q.trace_distance(zero, plus) - 1 / np.sqrt(2)) < 1e-9


def test_trace_distance_pure_state_formula():
    # for pure states the distance is sqrt(1 - |<psi|phi>|^2)
    rng = np.random.default_rng(14)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        a, b = _random_pure(rng, n), _random_pure(rng, n)
        overlap = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
        want = np.sqrt(1.0 - overlap)
        assert abs(Q.trace_distance(a, b) - want) < 1e-9


def test_trace_distance_metric_properties_and_contractivity():
    rng = np.random.default_rng(15)
    for _ in range(6):
        n = int(rng.integers(1, 4))
        x, y, z = (_random_density(rng, n) for _ in range(3))
        assert abs(Q.trace_distance(x, y) - Q.trace_distance(y, x)) < 1e-9
        assert Q.trace_distance(x, z) <= Q.trace_distance(x, y) + Q.trace_distance(y, z) + 1e-9
        circ = Q.QuantumCircuit(n, _random_ops(rng, n, 8))
        assert Q.trace_distance(Q.run(circ, x), Q.run(circ, y)) <= Q.trace_distance(x, y) + 1e-9
    with pytest.raises(ValueError):
        Q.trace_distance(Q.DensityMatrix.basis([0]), Q.DensityMatrix.basis([0, 0]))


def test_trace_distance_basis_mixture():
    a = Q.BasisMixture(2, ((0.5, (0, 0)), (0.5, (1, 1))))
    b = Q.BasisMixture(2, ((0.25, (0, 0)), (0.75, (1, 1))))
    assert abs(Q.trace_distance(a, b) - 0.25) < 1e-12
    assert Q.trace_distance(a, a) == 0
    # agrees with the dense computation
    dense = Q.trace_distance(a.to_density_matrix(), b.to_density_matrix())
    assert abs(Q.trace_distance(a, b) - dense) < 1e-12


# -- coherent deferral -------------------------------------------------------


def _coherent_channel(c, rho):
    """Spec recipe: init aux to |0>, run the base, dephase and trace records."""
    cu = Q.make_coherent(c)
    ops = [("INIT0", (w,)) for w in cu.aux_inputs]
    ops += list(cu.base.ops)
    ops += [("MEASURE", (r,)) for r in cu.cnot_targets]
    out = Q.run(Q.QuantumCircuit(cu.base.n_qubits, tuple(ops)), rho)
    return out.trace_out(cu.cnot_targets) if cu.cnot_targets else out


def test_make_coherent_channel_equivalence():
    rng = np.random.default_rng(16)
    for _ in range(12):
        n = int(rng.integers(1, 4))
        circ = Q.QuantumCircuit(n, _random_ops(rng, n, 10))
        rho = _random_density(rng, n)
        direct = Q.run(circ, rho)
        deferred = _coherent_channel(circ, rho)
        assert Q.trace_distance(direct, deferred) < 1e-9


def test_make_coherent_shapes():
    plain = Q.QuantumCircuit(2, (("H", (0,)), ("CNOT", (0, 1))))
    cu = Q.make_coherent(plain)
    assert cu.base.ops == plain.ops and cu.cnot_targets == ()

    one = Q.QuantumCircuit(1, (("H", (0,)), ("MEASURE", (0,))))
    cu1 = Q.make_coherent(one)
    assert cu1.base.ops == (("H", (0,)), ("CNOT", (0, 1)))
    assert cu1.cnot_targets == (1,)

    with pytest.raises(ValueError):
        Q.CoherentUnitary(Q.QuantumCircuit(1, (("MEASURE", (0,)),)), (), ())


def test_coherent_unitaries_are_unitary():
    rng = np.random.default_rng(17)
    mats = []
    for _ in range(4):
        n = int(rng.integers(1, 4))
        circ = Q.QuantumCircuit(n, _random_ops(rng, n, 8))
        mats.append(Q.unitary_matrix(Q.make_coherent(circ)))
    mats.append(Q.unitary_matrix(Q.oracle_unitary(C.random_circuit(rng, 2, 5, 1))))
    # one wide case at the dense cap
    wide = Q.QuantumCircuit(8, _random_ops(rng, 8, 6) + (("MEASURE", (0,)), ("MEASURE", (3,))))
    mats.append(Q.unitary_matrix(Q.make_coherent(wide)))
    for u in mats:
        eye = np.eye(u.shape[0])
        assert np.max(np.abs(u.conj().T @ u - eye)) < 1e-9


# -- oracle unitaries --------------------------------------------------------


def test_oracle_unitary_point_function():
    f = C.build_function(C.FunctionSpec("POINT", 2, target=(1, 1)))
    cu = Q.oracle_unitary(f)
    for x0 in (0, 1):
        for x1 in (0, 1):
            sv = Q.StateVector.basis([x0, x1, 0] + [0] * (cu.base.n_qubits - 3))
            out = Q.run(cu.base, sv)
            idx = int(np.argmax(out.probs()))
            assert (idx >> 2) & 1 == (1 if (x0, x1) == (1, 1) else 0)
            assert idx & 3 == x0 | (x1 << 1)  # input register intact
            assert abs(out.probs()[idx] - 1.0) < 1e-9  # ancillas cleaned


def test_oracle_unitary_matches_eval_and_self_inverts():
    rng = np.random.default_rng(18)
    f = C.random_circuit(rng, 3, 10, 2)
    cu = Q.oracle_unitary(f)
    n, m = 3, 2
    for x in range(8):
        for y in range(4):
            xb = [(x >> i) & 1 for i in range(n)]
            yb = [(y >> i) & 1 for i in range(m)]
            sv = Q.StateVector.basis(xb + yb + [0] * (cu.base.n_qubits - n - m))
            once = Q.run(cu.base, sv)
            idx = int(np.argmax(once.probs()))
            assert abs(once.probs()[idx] - 1.0) < 1e-9
            fx = f.eval(xb)
            want = x | (sum((yb[i] ^ fx[i]) << i for i in range(m)) << n)
            assert idx == want
            twice = Q.run(cu.base, once)
            assert abs(twice.amplitudes[sum(b << i for i, b in enumerate(xb + yb + [0] * (cu.base.n_qubits - n - m)))] - 1.0) < 1e-9


def test_oracle_unitary_constant_zero_is_identity():
    # identity on every valid basis state, i.e. those with |0> ancillas
    f = C.BooleanCircuit(2, 1, (("CONST0", (), 2),), (2,))
    cu = Q.oracle_unitary(f)
    u = Q.unitary_matrix(cu)
    live = 1 << (3 if not cu.aux_inputs else min(cu.aux_inputs))
    assert np.max(np.abs(u[:, :live] - np.eye(u.shape[0])[:, :live])) < 1e-12


def test_oracle_unitary_superposition_query():
    f = C.build_function(C.FunctionSpec("POINT", 2, target=(0, 1)))
    cu = Q.oracle_unitary(f)
    n_total = cu.base.n_qubits
    # uniform over inputs, y = 0, ancillas |0> (they sit above the low 3 wires)
    wide = np.zeros(1 << n_total, dtype=complex)
    wide[:4] = 0.5
    out = Q.run(cu.base, Q.StateVector(n_total, wide))
    # amplitude mass sits on |x, f(x)>
    for x in range(4):
        fx = 1 if x == 2 else 0  # target (0,1) is x0=0, x1=1, index 2
        assert abs(out.amplitudes[x | (fx << 2)]) ** 2 == pytest.approx(0.25, abs=1e-9)


# -- input recovery ----------------------------------------------------------


def test_input_recovery_exact_for_classical_circuits():
    # circuit sizes keep nb + records + outputs at or under the dense cap
    rng = np.random.default_rng(19)
    shapes = [(3, 4, 1)] * 5 + [(2, 3, 2)]
    for n_in, n_gates, n_out in shapes:
        f = C.random_circuit(rng, n_in, n_gates, n_out)
        base = Q.from_reversible(C.compile_reversible(f))
        circ = Q.QuantumCircuit(
            base.n_qubits,
            base.ops + tuple(("MEASURE", (w,)) for w in base.output_wires),
            base.output_wires,
        )
        xb = [int(b) for b in rng.integers(0, 2, size=n_in)]
        recovered, outcome = Q.input_recover_run(circ, Q.DensityMatrix.basis(xb), rng)
        assert list(outcome) == f.eval(xb)
        assert Q.trace_distance(recovered, Q.DensityMatrix.basis(xb)) < 1e-9


def _noisy_output_circuit(k):
    """Output register holds the AND of k uniformly random bits: it is
    |0> except with probability 2^-k, so eps = 2^-k exactly."""
    ops = [("INIT0", (w,)) for w in range(1, k + 1)]
    ops += [("H", (w,)) for w in range(1, k + 1)]
    n = k + 1
    acc = 1
    for w in range(2, k + 1):
        ops.append(("INIT0", (n,)))
        ops.append(("CCX", (acc, w, n)))
        acc = n
        n += 1
    ops.append(("MEASURE", (acc,)))
    return Q.QuantumCircuit(n, tuple(ops), (acc,))


def test_input_recovery_bound_on_noisy_outputs():
    # Both sides of the recovery bound computed as exact channels.
    rng = np.random.default_rng(20)
    for k in (2, 3, 4):
        circ = _noisy_output_circuit(k)
        user = _random_pure(rng, 1).to_density_matrix()
        out_marg = Q.run(circ, user).trace_out(
            [w for w in range(circ.n_qubits) if w != circ.output_wires[0]]
        )
        eps = Q.trace_distance(out_marg, Q.DensityMatrix.basis([0]))
        assert abs(eps - 0.5 ** k) < 1e-9
        joint = Q.input_recover_channel(circ, user)
        # reference: untouched input beside |0> ancillas, then the ideal outcome
        embed = Q.QuantumCircuit(circ.n_qubits, tuple(("INIT0", (w,)) for w in circ.init0_wires))
        reference = Q.run(embed, user).tensor(Q.DensityMatrix.basis([0]))
        dist = Q.trace_distance(joint, reference)
        assert dist <= 2 * np.sqrt(eps) + 1e-6
        assert dist > 0  # the copy genuinely disturbs the state


def test_input_recovery_vacuous_for_nonclassical_output():
    # identity circuit, |+> input, output register = the input wire itself
    circ = Q.QuantumCircuit(1, (), output_wires=(0,))
    plus = Q.run(Q.QuantumCircuit(1, (("H", (0,)),)), Q.DensityMatrix.basis([0]))
    joint = Q.input_recover_channel(circ, plus)
    eps = Q.trace_distance(plus, Q.DensityMatrix.basis([0]))
    assert abs(eps - 1 / np.sqrt(2)) < 1e-9  # far from classical
    dist = Q.trace_distance(joint, plus.tensor(Q.DensityMatrix.basis([0])))
    assert dist <= 2 * np.sqrt(eps)  # bound holds but is vacuous (> 1)
    assert 2 * np.sqrt(eps) > 1


def test_input_recovery_requires_output_register():
    with pytest.raises(ValueError):
        Q.input_recover_channel(Q.QuantumCircuit(1, ()), Q.DensityMatrix.basis([0]))
