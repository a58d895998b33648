"""Candidate obfuscators and their public interpreters.

A candidate here is a promise of the benign kind: a template circuit whose
members differ only in an initial run of constants, an obfuscation map that
turns one member into a quantum state, and a public interpreter circuit
that evaluates the state on a classical input.  The interpreter is built
from the template alone, before any member exists, so it can never depend
on what was obfuscated.

Two candidates ship: an exact one whose state is the basis encoding of the
member description, and a noisy one that mixes in a small constant rate of
single-bit description errors.  The module interface accepts third-party
(template, description-width, error-rate) triples through make_candidate,
so anything that speaks this interface inherits the whole attack surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import families as FAM
from .circuits import BooleanCircuit, LevelProgram, compile_reversible
from .qfhe import charged_depth
from .qsim import BasisMixture, QuantumCircuit, from_reversible, trace_distance

DEFAULT_LAM = 6


def template_evaluator(template: BooleanCircuit, n_desc: int) -> BooleanCircuit:
    """The template with its description constants promoted to inputs.

    Constant gate k < n_desc becomes a COPY of a fresh input wire, so the
    returned circuit takes description || original inputs and agrees with
    every member of the template on the member's own description.
    """
    consts = len(template.const_bits())
    if not 0 <= n_desc <= consts:
        raise ValueError(f"template has {consts} constants, cannot expose {n_desc}")
    gates = []
    k = 0
    for kind, ins, out in template.gates:
        if kind in ("CONST0", "CONST1") and k < n_desc:
            gates.append(("COPY", (k,), out + n_desc))
            k += 1
        else:
            gates.append((kind, tuple(w + n_desc for w in ins), out + n_desc))
    return BooleanCircuit(
        n_desc + template.n_inputs,
        template.n_outputs,
        tuple(gates),
        tuple(w + n_desc for w in template.output_wires),
    )


@dataclass(frozen=True)
class Interpreter:
    """The public evaluation procedure: one compiled quantum circuit per
    supported input width, plus its charged depth q."""

    candidate: str
    q: int
    circuits: tuple  # ((total input width, QuantumCircuit), ...)

    def for_width(self, n: int) -> QuantumCircuit:
        for width, qc in self.circuits:
            if width == n:
                return qc
        raise ValueError(f"no interpreter circuit for width {n}")

    @property
    def circuit(self) -> QuantumCircuit:
        return self.circuits[0][1]


class Candidate:
    """One (template, n_desc, eps_f) obfuscator.

    eps_f = 0 encodes descriptions as basis states; eps_f > 0 additionally
    mixes in n_flips single-bit-flipped descriptions with total weight
    eps_f.  Everything derived (evaluator, batch program, interpreter) is
    computed from the template once and cached.
    """

    def __init__(self, name, lam, template, n_desc, eps_f=0.0, n_flips=16):
        if not 0.0 <= float(eps_f) < 0.5:
            raise ValueError("functional error rate must be in [0, 0.5)")
        if eps_f > 0.0 and not 1 <= n_flips <= n_desc:
            raise ValueError("flip branch count must be in 1..n_desc")
        self.name = str(name)
        self.lam = int(lam)
        self.template = template
        self.n_desc = int(n_desc)
        self.eps_f = float(eps_f)
        self.n_flips = int(n_flips)

    @property
    def ref(self) -> str:
        return f"{self.name}@{self.lam}"

    @property
    def m_qubits(self) -> int:
        """Qubits in an obfuscation state; fixed per candidate width."""
        return self.n_desc

    @cached_property
    def evaluator(self) -> BooleanCircuit:
        return template_evaluator(self.template, self.n_desc)

    @cached_property
    def program(self) -> LevelProgram:
        return LevelProgram.from_boolean(self.evaluator)

    @cached_property
    def interpreter(self) -> Interpreter:
        j = from_reversible(compile_reversible(self.evaluator))
        return Interpreter(
            candidate=self.ref,
            q=charged_depth(j),
            circuits=((self.evaluator.n_inputs, j),),
        )


# ---------------------------------------------------------------------------
# Registry.
# ---------------------------------------------------------------------------


def _member_candidate(name, lam, eps_f, n_flips=16):
    circuit, layout = FAM.member_template(lam)
    return Candidate(name, lam, circuit, layout.n_desc, eps_f, n_flips)


_FACTORIES = {
    "basis": lambda lam: _member_candidate("basis", lam, 0.0),
    "noisy": lambda lam: _member_candidate("noisy", lam, 0.05),
    "mbpf": lambda lam: Candidate("mbpf", lam, *FAM.mbpf_template(lam)),
}

_INSTANCES: dict = {}


def candidate_names() -> tuple:
    return tuple(sorted(_FACTORIES))


def get_candidate(name: str, lam: int | None = None) -> Candidate:
    """Resolve a candidate by name or 'name@lam' reference, building and
    caching it on first use."""
    if "@" in name:
        name, _, tail = name.partition("@")
        ref_lam = int(tail)
        if lam is not None and lam != ref_lam:
            raise ValueError("conflicting widths in candidate reference")
        lam = ref_lam
    lam = DEFAULT_LAM if lam is None else int(lam)
    key = (name, lam)
    if key not in _INSTANCES:
        if name not in _FACTORIES:
            raise ValueError(f"unknown candidate {name!r}")
        _INSTANCES[key] = _FACTORIES[name](lam)
    return _INSTANCES[key]


def make_candidate(name, lam, template, n_desc, eps_f=0.0, n_flips=16) -> Candidate:
    """Register a third-party candidate so its obfuscations can resolve
    their interpreter later.  Names must not shadow shipped candidates."""
    if name in _FACTORIES:
        raise ValueError(f"candidate name {name!r} is taken")
    cand = Candidate(name, lam, template, n_desc, eps_f, n_flips)
    if (cand.name, cand.lam) in _INSTANCES:
        raise ValueError(f"candidate {cand.ref} already registered")
    _INSTANCES[(cand.name, cand.lam)] = cand
    return cand


def _resolve(candidate) -> Candidate:
    if isinstance(candidate, Candidate):
        return candidate
    return get_candidate(candidate)


# ---------------------------------------------------------------------------
# Obfuscation and interpretation.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Obfuscation:
    """A state over the candidate's description register plus the reference
    naming the public interpreter that evaluates it."""

    state: BasisMixture
    interpreter: str


def _desc_of(cand: Candidate, circuit) -> tuple:
    if isinstance(circuit, FAM.FamilyMember):
        # members of the shared template carry their description directly;
        # minting the full netlist just to read constants back is skipped
        if (
            circuit.block_path != "table"
            or FAM.member_template(circuit.lam)[0] is not cand.template
        ):
            raise ValueError("member does not belong to this candidate's template")
        return circuit.desc_bits
    if (
        circuit.n_inputs != cand.template.n_inputs
        or circuit.n_outputs != cand.template.n_outputs
        or circuit.output_wires != cand.template.output_wires
        or len(circuit.gates) != len(cand.template.gates)
    ):
        raise ValueError("circuit shape does not match the candidate template")
    k = 0
    for g_c, g_t in zip(circuit.gates, cand.template.gates):
        if g_t[0] in ("CONST0", "CONST1") and k < cand.n_desc:
            k += 1
            if g_c[0] in ("CONST0", "CONST1") and g_c[1:] == g_t[1:]:
                continue
            raise ValueError("circuit shape does not match the candidate template")
        if g_c != g_t:
            raise ValueError("circuit shape does not match the candidate template")
    return tuple(circuit.const_bits()[: cand.n_desc])


def obf(candidate, circuit, rng=None) -> Obfuscation:
    """Obfuscate one template member (a BooleanCircuit, or a FamilyMember
    of the member template).  Deterministic given the rng seed."""
    cand = _resolve(candidate)
    rng = np.random.default_rng() if rng is None else rng
    desc = _desc_of(cand, circuit)
    if cand.eps_f == 0.0:
        state = BasisMixture(cand.n_desc, ((1.0, desc),))
    else:
        flips = sorted(
            int(w) for w in rng.choice(cand.n_desc, size=cand.n_flips, replace=False)
        )
        branches = [(1.0 - cand.eps_f, desc)]
        for w in flips:
            flipped = list(desc)
            flipped[w] ^= 1
            branches.append((cand.eps_f / cand.n_flips, tuple(flipped)))
        state = BasisMixture(cand.n_desc, tuple(branches))
    return Obfuscation(state, cand.ref)


def _branch_outputs(cand: Candidate, state: BasisMixture, queries) -> np.ndarray:
    """Evaluator outputs for every (branch, query) pair in one batch."""
    n_in = cand.template.n_inputs
    qs = np.array([[int(v) for v in q] for q in queries], dtype=np.uint8)
    if qs.shape[1] != n_in:
        raise ValueError(f"inputs must be {n_in} bits wide")
    desc = np.array([bits for _, bits in state.branches], dtype=np.uint8)
    b, q = desc.shape[0], qs.shape[0]
    rows = np.empty((b * q, cand.n_desc + n_in), dtype=np.uint8)
    rows[:, : cand.n_desc] = np.repeat(desc, q, axis=0)
    rows[:, cand.n_desc :] = np.tile(qs, (b, 1))
    return cand.program.eval_batch(rows).reshape(b, q, -1)


def interpret_rec_seq(obfuscation: Obfuscation, queries, rng=None):
    """Run the input-recovering interpreter over a query sequence.

    Semantically identical to chaining interpret_rec one query at a time:
    each outcome is sampled from the current mixture and the mixture is
    conditioned on it before the next query.  Branch outputs never change
    across the chain, so they are computed in a single batch up front;
    only the bookkeeping walks the sequence.

    Returns (recovered Obfuscation, list of output bit tuples).
    """
    cand = _resolve(obfuscation.interpreter)
    rng = np.random.default_rng() if rng is None else rng
    state = obfuscation.state
    outs = _branch_outputs(cand, state, queries)
    alive = list(range(len(state.branches)))
    probs = [p for p, _ in state.branches]
    results = []
    for qi in range(outs.shape[1]):
        groups: dict = {}
        for b in alive:
            groups.setdefault(outs[b, qi].tobytes(), []).append(b)
        keys = list(groups)
        weights = np.array([sum(probs[b] for b in groups[k]) for k in keys])
        pick = keys[int(rng.choice(len(keys), p=weights / weights.sum()))]
        alive = groups[pick]
        total = sum(probs[b] for b in alive)
        for b in alive:
            probs[b] /= total
        results.append(tuple(int(v) for v in np.frombuffer(pick, dtype=np.uint8)))
    post = BasisMixture(
        state.n_qubits, tuple((probs[b], state.branches[b][1]) for b in alive)
    )
    return Obfuscation(post, obfuscation.interpreter), results


def interpret_rec(obfuscation: Obfuscation, x, rng=None):
    """One recovering evaluation: (recovered Obfuscation, output bits)."""
    recovered, results = interpret_rec_seq(obfuscation, [x], rng)
    return recovered, results[0]


def interpret(obfuscation: Obfuscation, x, rng=None) -> tuple:
    """Evaluate the obfuscation on x and return the sampled output bits."""
    _, bits = interpret_rec(obfuscation, x, rng)
    return bits


def output_distribution(obfuscation: Obfuscation, x) -> dict:
    """Exact distribution of interpret(obfuscation, x) over bit tuples."""
    cand = _resolve(obfuscation.interpreter)
    outs = _branch_outputs(cand, obfuscation.state, [x])
    dist: dict = {}
    for (p, _), row in zip(obfuscation.state.branches, outs[:, 0, :]):
        key = tuple(int(v) for v in row)
        dist[key] = dist.get(key, 0.0) + p
    return dist


def functional_error(obfuscation: Obfuscation, x, expected) -> float:
    """Trace distance of the interpreter output from the intended value;
    for an output diagonal in the computational basis this is exactly the
    probability of answering anything else."""
    # branch weights can overshoot 1.0 by an ulp when summed
    return max(
        0.0,
        1.0
        - output_distribution(obfuscation, x).get(
            tuple(int(v) for v in expected), 0.0
        ),
    )


@dataclass(frozen=True)
class RecoveryStats:
    """How disturbing one recovering evaluation is.

    eps: weight off the likeliest outcome (the measured output error).
    likely_distance: distance of the recovered state from the original,
    conditioned on that likeliest outcome.
    expected_distance: the same distance averaged over all outcomes.
    """

    eps: float
    likely_distance: float
    expected_distance: float


def recovery_bound_stats(obfuscation: Obfuscation, x) -> RecoveryStats:
    cand = _resolve(obfuscation.interpreter)
    state = obfuscation.state
    outs = _branch_outputs(cand, state, [x])
    groups: dict = {}
    for b in range(len(state.branches)):
        groups.setdefault(outs[b, 0].tobytes(), []).append(b)
    stats = []
    for members in groups.values():
        w = sum(state.branches[b][0] for b in members)
        post = BasisMixture(
            state.n_qubits,
            tuple((state.branches[b][0] / w, state.branches[b][1]) for b in members),
        )
        stats.append((w, trace_distance(state, post)))
    best_w, best_d = max(stats, key=lambda t: t[0])
    return RecoveryStats(
        eps=1.0 - best_w,
        likely_distance=best_d,
        expected_distance=sum(w * d for w, d in stats),
    )
