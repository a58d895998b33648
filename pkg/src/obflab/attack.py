"""The generic distinguisher: classical queries rebuild the public key,
one homomorphic run of the public interpreter turns the obfuscated state
into an encryption of the hidden point value, and the locked capability
from the auxiliary material checks that value without ever holding a
secret key.

Two entry points share the machinery.  attack_noaux starts from nothing
but the obfuscation: it asks the member itself for its auxiliary row and
its key blocks, assembles the public key from the answers, and only then
goes quantum.  attack_aux receives the auxiliary material up front and
spends no classical queries at all.  Both run qeval exactly once, as the
final step before the verdict, and both map every failure (a bottom row,
a key mismatch, an exhausted depth budget, junk bytes) to the verdict 0:
a broken pipeline is evidence of the zero function, never an error.

Every step is recorded in an AttackAudit so tests can pin down the order
of operations and the absence of secret material, and run_experiment
drives paired point/zero trials into a small deterministic report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import candidates as C
from . import ccobf
from . import families as FAM
from . import fhe as F
from . import keyblocks as KB
from . import prf as P
from .errors import ObflabError
from .qfhe import demote, promote, qenc, qeval, qrestrict, qtensor
from .qsim import BasisMixture


@dataclass
class AttackAudit:
    """Append-only trace of what an attack run touched.

    Tests use it to assert the promised discipline: all interpreter
    queries happen in one pass, qeval appears exactly once and after
    them, and the run ends in a verdict with a stated reason.
    """

    events: list = field(default_factory=list)

    def note(self, kind: str, **info) -> None:
        self.events.append((kind, info))

    def kinds(self) -> list:
        return [k for k, _ in self.events]

    def count(self, kind: str) -> int:
        return sum(1 for k, _ in self.events if k == kind)

    def verdict(self) -> dict:
        for kind, info in reversed(self.events):
            if kind == "verdict":
                return info
        raise ValueError("attack did not conclude")


def _reject(audit: AttackAudit, reason: str, detail: str = "") -> int:
    audit.note("verdict", bit=0, reason=reason, detail=detail)
    return 0


def _value_wires(lam: int, j) -> tuple:
    """Positions of the point value in the interpreter's output register.

    Bare multi-bit members answer the value directly; full template
    members prefix an ok flag and pad the payload out to a fixed width.
    """
    outs = j.output_wires
    return tuple(outs[:lam]) if len(outs) == lam else tuple(outs[1 : 1 + lam])


def attack_noaux(obfuscation: C.Obfuscation, rng, audit: AttackAudit | None = None) -> int:
    """Decide point-vs-zero from the obfuscation alone.

    The member is its own key escrow: choice 0 yields the encrypted point
    input and the locked value checker, choice 1 row i yields key block i.
    With the public key assembled from those answers, the interpreter runs
    once under encryption on (recovered state, point choice, encrypted
    input), and the capability tests the encrypted value it produced.
    """
    audit = AttackAudit() if audit is None else audit
    cand = C.get_candidate(obfuscation.interpreter)
    lam, q = cand.lam, cand.interpreter.q
    queries = [list(FAM.choice_bits(0)) + [0] * lam]
    queries += [list(FAM.choice_bits(1)) + P.int_to_bits(i, lam) for i in range(q + 1)]
    try:
        recovered, outs = C.interpret_rec_seq(obfuscation, queries, rng)
        audit.note("interpret", queries=len(queries))
        if outs[0][0] != 1:
            return _reject(audit, "aux-row-bottom")
        alpha_ct, cap = FAM.parse_aux_payload(lam, outs[0][1:])
        audit.note("parse-aux", cts=len(alpha_ct))
        blocks = []
        for i in range(q + 1):
            if outs[1 + i][0] != 1:
                return _reject(audit, "block-row-bottom", f"row {i}")
            blocks.append(FAM.parse_block_payload(i, outs[1 + i][1:]))
        pk = KB.assemble(blocks)
        audit.note("assemble", blocks=len(blocks), kid=pk.kid.hex())

        point = recovered.state.tensor(BasisMixture.basis(FAM.choice_bits(2)))
        qct = qtensor(qenc(pk, point, rng), promote(alpha_ct))
        audit.note("qenc", qubits=qct.n_qubits)
        j = cand.interpreter.for_width(qct.n_qubits)
        out_ct = qeval(pk, j, qct, rng)
        audit.note("qeval", depth=q)
        cts = demote(qrestrict(out_ct, _value_wires(lam, j)), rng=rng)
        audit.note("demote", cts=len(cts))
        hit = ccobf.eval_obf(cap, P.bytes_to_bits(F.cts_to_bytes(cts)))
    except (ObflabError, ValueError) as e:
        return _reject(audit, type(e).__name__, str(e))
    bit = int(hit == (1,))
    audit.note("verdict", bit=bit, reason="evaluated")
    return bit


def attack_aux(aux: FAM.AuxInfo, obfuscation: C.Obfuscation, rng, audit: AttackAudit | None = None) -> int:
    """Same verdict when the auxiliary material arrives for free.

    No classical queries at all: encrypt the obfuscated state under the
    given public key, adjoin the given encryption of the point input, run
    the interpreter once under encryption, test the value.
    """
    audit = AttackAudit() if audit is None else audit
    cand = C.get_candidate(obfuscation.interpreter)
    lam = cand.lam
    try:
        qct = qtensor(qenc(aux.pk, obfuscation.state, rng), promote(aux.alpha_ct))
        audit.note("qenc", qubits=qct.n_qubits)
        j = cand.interpreter.for_width(qct.n_qubits)
        out_ct = qeval(aux.pk, j, qct, rng)
        audit.note("qeval", depth=cand.interpreter.q)
        cts = demote(qrestrict(out_ct, _value_wires(lam, j)), rng=rng)
        audit.note("demote", cts=len(cts))
        hit = ccobf.eval_obf(aux.o, P.bytes_to_bits(F.cts_to_bytes(cts)))
    except (ObflabError, ValueError) as e:
        return _reject(audit, type(e).__name__, str(e))
    bit = int(hit == (1,))
    audit.note("verdict", bit=bit, reason="evaluated")
    return bit


# ---------------------------------------------------------------------------
# Experiment harness.
# ---------------------------------------------------------------------------


def wilson_ci(k: int, n: int, z: float = 1.959963984540054) -> tuple:
    """95% score interval for k successes in n Bernoulli trials."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * ((p * (1 - p) / n + z * z / (4 * n * n)) ** 0.5) / den
    # at the extremes mid and half agree exactly; don't leak float dust
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return (lo, hi)


def _trial_rng(seed: int, trial: int):
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def _trial_noaux(cand: C.Candidate, seed: int, trial: int) -> tuple:
    """One paired trial: a point member and a zero member on shared coins."""
    lam, q = cand.lam, cand.interpreter.q
    rng = _trial_rng(seed, trial)
    alpha = tuple(int(v) for v in rng.integers(0, 2, size=lam))
    beta = FAM._uniform_nonzero(lam, rng)
    r = F.RandomTape.random(lam, rng)
    rp = F.RandomTape.random(lam, rng)
    aux = FAM.sample_D_r(alpha, q, r, beta=beta)
    bits = []
    for kind in FAM.KINDS:
        member = FAM.build_member(kind, alpha, beta, q, r, rp, aux)
        bits.append(attack_noaux(C.obf(cand, member, rng), rng))
    return tuple(bits)


def _trial_aux(cand: C.Candidate, seed: int, trial: int) -> tuple:
    lam, q = cand.lam, cand.interpreter.q
    rng = _trial_rng(seed, trial)
    alpha = tuple(int(v) for v in rng.integers(0, 2, size=lam))
    beta = FAM._uniform_nonzero(lam, rng)
    r = F.RandomTape.random(lam, rng)
    alpha_ct, cap = FAM.sample_D_r(alpha, q, r, beta=beta)
    # the secret half of the keypair is dropped on the floor here
    aux = FAM.AuxInfo(F.keygen(F.FheParams(lam, q), r).pk, alpha_ct, cap)
    values = {"POINT": beta, "ZERO": (0,) * lam}
    bits = []
    for kind in FAM.KINDS:
        circuit = FAM.mbpf_member_circuit(alpha, values[kind])
        bits.append(attack_aux(aux, C.obf(cand, circuit, rng), rng))
    return tuple(bits)


_TRIALS = {"noaux": _trial_noaux, "aux": _trial_aux}


def run_experiment(kind: str, candidate: str, trials: int, seed: int = 0, jobs: int = 1) -> dict:
    """Paired point/zero trials of one attack against one candidate.

    Each trial draws its coins from SeedSequence([seed, trial]), so the
    report is a pure function of (kind, candidate, trials, seed) no matter
    how many worker threads split the trial range.
    """
    if kind not in _TRIALS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    if trials < 1:
        raise ValueError("need at least one trial")
    cand = C.get_candidate(candidate)
    # touch the lazy caches once before any thread fan-out
    cand.program, cand.interpreter
    trial = _TRIALS[kind]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(lambda t: trial(cand, seed, t), range(trials)))
    else:
        pairs = [trial(cand, seed, t) for t in range(trials)]
    k_point = sum(p for p, _ in pairs)
    k_zero = sum(z for _, z in pairs)
    return {
        "kind": kind,
        "candidate": cand.ref,
        "lambda": cand.lam,
        "q": cand.interpreter.q,
        "trials": trials,
        "seed": seed,
        "p_point": k_point / trials,
        "p_zero": k_zero / trials,
        "advantage": k_point / trials - k_zero / trials,
        "ci_point": list(wilson_ci(k_point, trials)),
        "ci_zero": list(wilson_ci(k_zero, trials)),
    }
