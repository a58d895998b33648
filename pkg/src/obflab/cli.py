"""Command line front end: demo-attack, verify, bench.

`demo-attack` runs the paired point/zero experiments and writes report
files.  Report files are a pure function of the experiment config: no
timestamps, no hostnames, no timing.  Wall time goes to stderr where it
can't break byte-for-byte reproducibility.

`verify` re-checks the load-bearing invariants of one subsystem and
prints one PASS/FAIL line per check.  Exit status is zero iff every
check passed.  The decompose suite includes a deliberate corruption to
confirm that a flipped byte in a key block cannot slip through.

`bench` times the pipeline stages across toy security levels and flags
anything over its budget.  Timing output is what bench is FOR, so its
report is exempt from the determinism rule above.

Config precedence, lowest to highest: built-in defaults, --config file
(flat key=value lines), OBFLAB_* environment variables, command flags.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import attack as ATK
from . import candidates as CAND
from . import circuits as CIR
from . import errors as E
from . import families as FAM
from . import fhe as F
from . import garble as G
from . import keyblocks as KB
from . import oracles as ORA
from . import prf as P
from . import qfhe as QF
from . import qsim as Q

DEMO_SCHEMA = "obflab-demo-attack/1"
BENCH_SCHEMA = "obflab-bench/1"

DEFAULTS = {
    "trials": 100,
    "seed": 0,
    "lambda": 6,
    "candidate": "basis",
    "jobs": 1,
    "out": "reports",
    "format": "table",
}
_INT_KEYS = ("trials", "seed", "lambda", "jobs")
FORMATS = ("json", "csv", "table")
NOAUX_CANDIDATES = ("basis", "noisy")


class ConfigError(ValueError):
    pass


def code_hash() -> str:
    """Digest of the package sources; identical runs of identical code
    produce identical report bytes, and this field proves it."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode() + b"\0" + path.read_bytes() + b"\0")
    return h.hexdigest()[:16]


# -- config --------------------------------------------------------------------


def _read_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}")
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(
                f"{path}:{ln}: unknown key {key!r} (valid: {', '.join(sorted(DEFAULTS))})"
            )
        out[key] = value
    return out


def _coerce(key: str, value, where: str):
    if key in _INT_KEYS and not isinstance(value, int):
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(f"{where}: {key} must be an integer, got {value!r}")
    return value


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults < config file < OBFLAB_* environment < flags."""
    cfg = dict(DEFAULTS)
    path = getattr(args, "config", None) or os.environ.get("OBFLAB_CONFIG")
    if path:
        for k, v in _read_config_file(path).items():
            cfg[k] = _coerce(k, v, path)
    for key in DEFAULTS:
        env = os.environ.get(f"OBFLAB_{key.upper()}")
        if env is not None:
            cfg[key] = _coerce(key, env, f"OBFLAB_{key.upper()}")
    for key in DEFAULTS:
        flag = getattr(args, "lam" if key == "lambda" else key, None)
        if flag is not None:
            cfg[key] = flag

    if cfg["trials"] < 1:
        raise ConfigError("trials must be at least 1")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")
    if not 4 <= cfg["lambda"] <= 8:
        raise ConfigError("lambda must be in 4..8 for the toy sweep")
    if cfg["candidate"] not in NOAUX_CANDIDATES:
        raise ConfigError(
            f"candidate must be one of {', '.join(NOAUX_CANDIDATES)}; the"
            " auxiliary-input row always runs the bare multi-bit family"
        )
    if cfg["format"] not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
    return cfg


# -- demo-attack ---------------------------------------------------------------

_CSV_COLS = (
    "kind", "candidate", "lambda", "q", "trials", "seed",
    "p_point", "p_zero", "advantage",
    "ci_point_lo", "ci_point_hi", "ci_zero_lo", "ci_zero_hi",
)


def _flat_row(row: dict) -> dict:
    flat = {k: row[k] for k in _CSV_COLS if k in row}
    flat["ci_point_lo"], flat["ci_point_hi"] = row["ci_point"]
    flat["ci_zero_lo"], flat["ci_zero_hi"] = row["ci_zero"]
    return flat


def _demo_csv(rows) -> str:
    lines = [",".join(_CSV_COLS)]
    for row in rows:
        flat = _flat_row(row)
        lines.append(",".join(repr(flat[c]) if isinstance(flat[c], float) else str(flat[c]) for c in _CSV_COLS))
    return "\n".join(lines) + "\n"


def _demo_table(rows) -> str:
    cols = ("kind", "candidate", "trials", "p_point", "p_zero", "advantage", "ci_point", "ci_zero")
    cells = [cols]
    for row in rows:
        cells.append((
            row["kind"], row["candidate"], str(row["trials"]),
            f"{row['p_point']:.4f}", f"{row['p_zero']:.4f}", f"{row['advantage']:.4f}",
            "[{:.4f}, {:.4f}]".format(*row["ci_point"]),
            "[{:.4f}, {:.4f}]".format(*row["ci_zero"]),
        ))
    widths = [max(len(r[i]) for r in cells) for i in range(len(cols))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells) + "\n"


def cmd_demo_attack(cfg: dict) -> int:
    lam = cfg["lambda"]
    plan = [("aux", f"mbpf@{lam}"), ("noaux", f"{cfg['candidate']}@{lam}")]

    # fail before any work if the descriptions cannot index enough key blocks
    q = CAND.get_candidate(f"{cfg['candidate']}@{lam}").interpreter.q
    if q > (1 << lam) - 1:
        print(
            f"error: the no-advice attack needs {q} key blocks but lambda={lam}"
            f" descriptions index at most {(1 << lam) - 1}; use --lambda 6",
            file=sys.stderr,
        )
        return 2

    t0 = time.perf_counter()
    rows = [
        ATK.run_experiment(kind, candidate, cfg["trials"], seed=cfg["seed"], jobs=cfg["jobs"])
        for kind, candidate in plan
    ]
    wall = time.perf_counter() - t0

    report = {
        "schema": DEMO_SCHEMA,
        "code": code_hash(),
        "config": {k: cfg[k] for k in ("candidate", "lambda", "seed", "trials")},
        "rows": rows,
    }
    doc = json.dumps(report, sort_keys=True, indent=2) + "\n"
    csv_text = _demo_csv(rows)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "demo_attack.json").write_text(doc)
    (out / "demo_attack.csv").write_text(csv_text)

    if cfg["format"] == "json":
        sys.stdout.write(doc)
    elif cfg["format"] == "csv":
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(_demo_table(rows))
    print(f"wrote {out / 'demo_attack.json'} and {out / 'demo_attack.csv'}", file=sys.stderr)
    print(f"wall time {wall:.1f}s (console only; reports carry no timing)", file=sys.stderr)
    return 0


# -- verify --------------------------------------------------------------------


def _chk_recovery_classical_exact():
    rng = np.random.default_rng(101)
    f = CIR.random_circuit(rng, 3, 4, 1)
    base = Q.from_reversible(CIR.compile_reversible(f))
    circ = Q.QuantumCircuit(
        base.n_qubits,
        base.ops + tuple(("MEASURE", (w,)) for w in base.output_wires),
        base.output_wires,
    )
    worst = 0.0
    for _ in range(5):
        xb = [int(b) for b in rng.integers(0, 2, size=3)]
        rec, outcome = Q.input_recover_run(circ, Q.DensityMatrix.basis(xb), rng)
        if list(outcome) != f.eval(xb):
            raise AssertionError("recovered outcome disagrees with plain evaluation")
        worst = max(worst, Q.trace_distance(rec, Q.DensityMatrix.basis(xb)))
    if worst > 1e-9:
        raise AssertionError(f"basis input came back disturbed by {worst:.3g}")
    return f"worst distance {worst:.1e} over 5 runs"


def _chk_recovery_disturbance_bound():
    # output register holds the AND of three coin flips, so eps = 1/8 exactly
    ops = [("INIT0", (w,)) for w in (1, 2, 3, 4, 5)]
    ops += [("H", (w,)) for w in (1, 2, 3)]
    ops += [("CCX", (1, 2, 4)), ("CCX", (4, 3, 5)), ("MEASURE", (5,))]
    circ = Q.QuantumCircuit(6, tuple(ops), (5,))
    rng = np.random.default_rng(7)
    amps = rng.normal(size=2) + 1j * rng.normal(size=2)
    user = Q.StateVector(1, amps / np.linalg.norm(amps)).to_density_matrix()
    joint = Q.input_recover_channel(circ, user)
    embed = Q.QuantumCircuit(circ.n_qubits, tuple(("INIT0", (w,)) for w in circ.init0_wires))
    reference = Q.run(embed, user).tensor(Q.DensityMatrix.basis([0]))
    dist = Q.trace_distance(joint, reference)
    bound = 2 * (1 / 8) ** 0.5 + 1e-6
    if dist > bound:
        raise AssertionError(f"disturbance {dist:.4f} exceeds 2*sqrt(eps) = {bound:.4f}")
    return f"disturbance {dist:.4f} <= {bound:.4f}"


def _chk_recovery_needs_output_register():
    try:
        Q.input_recover_channel(Q.QuantumCircuit(1, ()), Q.DensityMatrix.basis([0]))
    except ValueError:
        return "circuit without an output register is rejected"
    raise AssertionError("recovery accepted a circuit with no output register")


def _tapes(lam, seed):
    rng = np.random.default_rng(seed)
    return F.RandomTape.random(lam, rng), F.RandomTape.random(lam, rng)


def _n_blocks(lam, d, strategy):
    # head block plus one per level (bootstrapped) or per keygen gate (garbled)
    return KB.blocks_needed(lam, d, strategy) + 1


def _chk_assemble_matches_keygen():
    lam, d = 6, 5
    r, rp = _tapes(lam, 113)
    want = F.keygen(F.FheParams(lam, d), r).pk.key_bytes
    for strategy in ("bootstrapped", "garbled"):
        pk = KB.assemble(KB.block_gen_range(lam, 0, _n_blocks(lam, d, strategy), r, rp, strategy))
        if pk.key_bytes != want:
            raise AssertionError(f"{strategy} assembly drifted from keygen")
    return "both strategies reproduce keygen byte for byte at lambda=6, d=5"


def _chk_sim_blocks_match():
    lam, d = 6, 4
    r, rp = _tapes(lam, 127)
    pk = F.keygen(F.FheParams(lam, d), r).pk
    real = KB.block_gen_range(lam, 0, _n_blocks(lam, d, "bootstrapped"), r, rp, "bootstrapped")
    simmed = KB.sim_blocks(lam, pk, "bootstrapped")
    if [b.body for b in simmed] != [b.body for b in real]:
        raise AssertionError("simulated blocks differ from the real decomposition")
    return "public-key slices equal the honest block bodies"


def _chk_corrupted_block_detected():
    lam, d = 6, 5
    r, rp = _tapes(lam, 113)
    want = F.keygen(F.FheParams(lam, d), r).pk.key_bytes
    for strategy, idx, byte in (("bootstrapped", 2, 7), ("garbled", 3, 5)):
        blocks = list(KB.block_gen_range(lam, 0, _n_blocks(lam, d, strategy), r, rp, strategy))
        body = bytearray(blocks[idx].body)
        body[byte] ^= 0x40
        blocks[idx] = KB.KeyBlock(idx, strategy, bytes(body))
        try:
            pk = KB.assemble(blocks)
        except E.ObflabError:
            continue  # fault surfaced as a hard error
        if pk.key_bytes == want:
            raise AssertionError(f"a corrupted {strategy} block went unnoticed")
    return "single bit flips in block bodies surface on assembly"


def _chk_empty_assembly_rejected():
    try:
        KB.assemble([])
    except E.AssemblyError:
        return "empty block list is rejected"
    raise AssertionError("assemble accepted an empty block list")


def _chk_fhe_classical_roundtrip():
    rng = np.random.default_rng(23)
    kp = F.keygen(F.FheParams(6, 32), F.RandomTape.random(6, rng))
    for _ in range(5):
        f = CIR.random_circuit(rng, 6, 8, 2)
        xb = [int(b) for b in rng.integers(0, 2, size=6)]
        cts = F.enc(kp.pk, xb, rng)
        got = F.dec(kp.sk, F.eval_circuit(kp.pk, f, cts, rng))
        if got != f.eval(xb):
            raise AssertionError("homomorphic evaluation disagrees with the plain circuit")
    return "dec(eval(enc(x))) exact on 5 random circuits"


def _chk_qfhe_quantum_roundtrip():
    rng = np.random.default_rng(29)
    f = CIR.random_circuit(rng, 3, 4, 2)
    rev = CIR.compile_reversible(f)
    qc = Q.from_reversible(rev)
    kp = F.keygen(F.FheParams(4, 32), F.RandomTape.random(4, rng))
    for _ in range(4):
        xb = [int(b) for b in rng.integers(0, 2, size=3)]
        qct = QF.qenc(kp.pk, Q.BasisMixture.basis(tuple(xb)), rng)
        out = QF.qrestrict(QF.qeval(kp.pk, qc, qct, rng), rev.output_wires)
        if F.dec(kp.sk, QF.demote(out, rng=rng)) != f.eval(xb):
            raise AssertionError("quantum evaluation disagrees with the plain circuit")
    return "qeval round trip exact on 4 basis inputs"


def _chk_depth_budget_enforced():
    rng = np.random.default_rng(31)
    qc = Q.from_reversible(CIR.compile_reversible(CIR.random_circuit(rng, 3, 6, 1)))
    need = QF.charged_depth(qc)
    starved = F.keygen(F.FheParams(4, need - 1), F.RandomTape.random(4, rng))
    qct = QF.qenc(starved.pk, Q.BasisMixture.basis((0, 0, 0)), rng)
    try:
        QF.qeval(starved.pk, qc, qct, rng)
    except E.DepthExceededError:
        pass
    else:
        raise AssertionError("evaluation ran past its depth budget")
    funded = F.keygen(F.FheParams(4, need), F.RandomTape.random(4, rng))
    QF.qeval(funded.pk, qc, QF.qenc(funded.pk, Q.BasisMixture.basis((0, 0, 0)), rng), rng)
    return f"depth {need} runs, depth {need - 1} is refused"


def _chk_foreign_key_rejected():
    rng = np.random.default_rng(37)
    kp1 = F.keygen(F.FheParams(4, 8), F.RandomTape.random(4, rng))
    kp2 = F.keygen(F.FheParams(4, 8), F.RandomTape.random(4, rng))
    qc = Q.from_reversible(CIR.compile_reversible(CIR.random_circuit(rng, 1, 2, 1)))
    foreign = QF.qenc(kp2.pk, Q.BasisMixture.basis((0,)), rng)
    try:
        QF.qeval(kp1.pk, qc, foreign, rng)
    except E.KeyMismatchError:
        pass
    else:
        raise AssertionError("evaluation under the wrong public key was accepted")
    try:
        QF.promote(F.enc(kp1.pk, [0], rng) + F.enc(kp2.pk, [1], rng))
    except E.KeyMismatchError:
        return "cross-key evaluate and promote both refused"
    raise AssertionError("promote across key ids was accepted")


def _chk_garble_roundtrip():
    rng = np.random.default_rng(41)
    f = CIR.random_circuit(rng, 4, 6, 2)
    gc = G.garble(f, b"verify-seed-0000")
    for _ in range(6):
        xb = [int(b) for b in rng.integers(0, 2, size=4)]
        got = G.decode(gc, G.evaluate(gc, G.encode_input(gc, xb)))
        if got != f.eval(xb):
            raise AssertionError("garbled evaluation disagrees with the plain circuit")
    return "encode/evaluate/decode exact on 6 random inputs"


def _chk_garble_deterministic():
    rng = np.random.default_rng(43)
    f = CIR.random_circuit(rng, 3, 5, 1)
    a = G.garble(f, b"verify-seed-0000")
    b = G.garble(f, b"verify-seed-0000")
    c = G.garble(f, b"verify-seed-0001")
    if [g.rows for g in a.gates] != [g.rows for g in b.gates]:
        raise AssertionError("same seed produced different tables")
    if [g.rows for g in a.gates] == [g.rows for g in c.gates]:
        raise AssertionError("different seeds produced identical tables")
    return "tables are a function of the seed and nothing else"


def _chk_foreign_label_trips_check():
    rng = np.random.default_rng(47)
    f = CIR.random_circuit(rng, 3, 5, 1)
    gc = G.garble(f, b"verify-seed-0000")
    other = G.garble(f, b"verify-seed-0001")
    try:
        G.evaluate(gc, G.encode_input(other, [0, 1, 0]))
    except E.EvaluationError:
        return "labels from the wrong garbling are refused"
    raise AssertionError("foreign labels evaluated without tripping the row check")


def _chk_oracle_accounting():
    h = ORA.point_oracle((1, 0, 1, 1), (1, 1, 0, 0))
    ORA.query(h, (1, 0, 1, 1))
    ORA.query(h, (0, 0, 0, 0))
    if h.classical_queries != 2 or h.superposition_queries != 0:
        raise AssertionError("query counters drifted from the transcript")
    if len(h.transcript) != 2:
        raise AssertionError("transcript length disagrees with the counters")
    return "counters equal transcript entries"


def _chk_choice_adapter_identity():
    rng = np.random.default_rng(59)
    g = ORA.OracleHandle(CIR.random_circuit(rng, 2, 4, 1), name="g")
    adapter = ORA.choice_adapt(g, (1,))
    direct = ORA.OracleHandle(g.circuit, name="direct")
    for v in range(8):
        x = tuple((v >> i) & 1 for i in range(3))
        got = ORA.query(adapter, x)
        expect = ORA.query(direct, x[1:]) if x[0] == 1 else (1,)
        if got != expect:
            raise AssertionError(f"adapter wrong on input {x}")
    if g.classical_queries != 2 * adapter.classical_queries:
        raise AssertionError("inner oracle was not charged two queries per call")
    return "exhaustive agreement; inner oracle charged exactly twice per call"


def _chk_squery_involution():
    rng = np.random.default_rng(61)
    h = ORA.OracleHandle(CIR.random_circuit(rng, 3, 4, 2), name="h")
    amps = rng.normal(size=32) + 1j * rng.normal(size=32)
    state = Q.StateVector(5, amps / np.linalg.norm(amps))
    back = ORA.squery(h, ORA.squery(h, state))
    dist = float(np.linalg.norm(back.amplitudes - state.amplitudes))
    if dist > 1e-9:
        raise AssertionError(f"double superposition query drifted by {dist:.3g}")
    return f"XOR-oracle applied twice is the identity ({dist:.1e})"


def _chk_composed_member_identical():
    lam, d = 6, 3
    rng = np.random.default_rng(67)
    alpha = tuple(int(v) for v in rng.integers(0, 2, size=lam))
    beta = FAM._uniform_nonzero(lam, rng)
    r = F.RandomTape.random(lam, rng)
    composed, aux = ORA.composed_member_oracle("POINT", lam, d, alpha, beta, r)
    rp = F.RandomTape.random(lam, rng)
    member = FAM.build_member("POINT", alpha, beta, d, r, rp, FAM.sample_D_r(alpha, d, r, beta=beta))
    real = ORA.OracleHandle(member.circuit, name="member")
    script = [list(FAM.choice_bits(0)) + [0] * lam]
    script += [list(FAM.choice_bits(1)) + P.int_to_bits(i, lam) for i in range(d + 2)]
    script += [list(FAM.choice_bits(2)) + list(alpha), list(FAM.choice_bits(3)) + [0] * lam]
    for x in script:
        if ORA.query(composed, x) != ORA.query(real, x):
            raise AssertionError("composed member answered differently from the baked member")
    return f"{len(script)} rows bit-identical to the baked member"


VERIFY_SUITES = {
    "recovery": (
        ("classical-inputs-exact", _chk_recovery_classical_exact),
        ("disturbance-bound", _chk_recovery_disturbance_bound),
        ("output-register-required", _chk_recovery_needs_output_register),
    ),
    "decompose": (
        ("assemble-matches-keygen", _chk_assemble_matches_keygen),
        ("simulated-blocks-match", _chk_sim_blocks_match),
        ("corrupted-block-detected", _chk_corrupted_block_detected),
        ("empty-assembly-rejected", _chk_empty_assembly_rejected),
    ),
    "qfhe": (
        ("classical-roundtrip", _chk_fhe_classical_roundtrip),
        ("quantum-roundtrip", _chk_qfhe_quantum_roundtrip),
        ("depth-budget-enforced", _chk_depth_budget_enforced),
        ("foreign-key-rejected", _chk_foreign_key_rejected),
    ),
    "garble": (
        ("evaluate-roundtrip", _chk_garble_roundtrip),
        ("seed-determinism", _chk_garble_deterministic),
        ("foreign-label-rejected", _chk_foreign_label_trips_check),
    ),
    "oracle": (
        ("query-accounting", _chk_oracle_accounting),
        ("choice-adapter-identity", _chk_choice_adapter_identity),
        ("superposition-involution", _chk_squery_involution),
        ("composed-member-identical", _chk_composed_member_identical),
    ),
}


def cmd_verify(suite: str) -> int:
    failures = 0
    for name, fn in VERIFY_SUITES[suite]:
        try:
            detail = fn()
        except Exception as exc:  # a failing check must not stop the others
            failures += 1
            print(f"FAIL {suite}/{name}: {exc}")
        else:
            print(f"PASS {suite}/{name}: {detail}")
    total = len(VERIFY_SUITES[suite])
    print(f"{suite}: {total - failures}/{total} checks passed")
    return 1 if failures else 0


# -- bench ---------------------------------------------------------------------

BUDGETS = {"template": 30.0, "interpret": 30.0, "assemble": 5.0, "qeval": 30.0, "attack-pair": 60.0}


def _bench_lambda(lam: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    rows = []

    t0 = time.perf_counter()
    cand = CAND.get_candidate(f"basis@{lam}")
    cand.program, cand.interpreter
    rows.append((lam, "template", time.perf_counter() - t0))

    alpha = tuple(int(v) for v in rng.integers(0, 2, size=lam))
    beta = FAM._uniform_nonzero(lam, rng)
    r = F.RandomTape.random(lam, rng)
    rp = F.RandomTape.random(lam, rng)
    d = 3
    member = FAM.build_member("POINT", alpha, beta, d, r, rp, FAM.sample_D_r(alpha, d, r, beta=beta))
    obfuscation = CAND.obf(cand, member, rng)
    queries = [list(FAM.choice_bits(0)) + [0] * lam]
    queries += [list(FAM.choice_bits(2)) + P.int_to_bits(x, lam) for x in range(1 << lam)]
    t0 = time.perf_counter()
    CAND.interpret_rec_seq(obfuscation, queries, rng)
    rows.append((lam, "interpret", time.perf_counter() - t0))

    t0 = time.perf_counter()
    KB.assemble(KB.block_gen_range(lam, 0, 10, r, rp, "bootstrapped"))
    rows.append((lam, "assemble", time.perf_counter() - t0))

    q = cand.interpreter.q
    kp = F.keygen(F.FheParams(lam, q), r)
    j = cand.interpreter.circuit
    qct = QF.qenc(kp.pk, Q.BasisMixture.basis((0,) * j.n_qubits), rng)
    t0 = time.perf_counter()
    QF.qeval(kp.pk, j, qct, rng)
    rows.append((lam, "qeval", time.perf_counter() - t0))

    if q <= (1 << lam) - 1:
        # a full paired attack only fits once descriptions can index q blocks
        t0 = time.perf_counter()
        ATK._trial_noaux(cand, seed, 0)
        rows.append((lam, "attack-pair", time.perf_counter() - t0))
    return rows


def cmd_bench(cfg: dict) -> int:
    rows = []
    for lam in range(4, cfg["lambda"] + 1):
        rows.extend(_bench_lambda(lam, cfg["seed"]))
    width = max(len(s) for _, s, _ in rows)
    over_any = False
    print(f"{'lam':>3}  {'stage'.ljust(width)}  {'seconds':>8}  budget")
    for lam, stage, secs in rows:
        budget = BUDGETS[stage]
        over = secs > budget
        over_any = over_any or over
        flag = "  OVER BUDGET" if over else ""
        print(f"{lam:>3}  {stage.ljust(width)}  {secs:>8.3f}  <{budget:g}s{flag}")
    if cfg.get("out"):
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        doc = {
            "schema": BENCH_SCHEMA,
            "code": code_hash(),
            "rows": [
                {"lambda": lam, "stage": s, "seconds": secs, "budget": BUDGETS[s], "over": secs > BUDGETS[s]}
                for lam, s, secs in rows
            ],
        }
        (out / "bench.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        print(f"wrote {out / 'bench.json'}", file=sys.stderr)
    return 1 if over_any else 0


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="obflab",
        description="distinguishing attacks on obfuscation candidates, with receipts",
    )
    sub = p.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo-attack", help="run paired point/zero experiments and write reports")
    demo.add_argument("--config", help="flat key=value config file")
    demo.add_argument("--trials", type=int, help="paired trials per row")
    demo.add_argument("--seed", type=int, help="root seed; trial t uses SeedSequence([seed, t])")
    demo.add_argument("--lambda", dest="lam", type=int, help="toy security parameter (4..8)")
    demo.add_argument("--candidate", choices=NOAUX_CANDIDATES, help="candidate for the no-advice row")
    demo.add_argument("--jobs", type=int, help="worker threads (does not change results)")
    demo.add_argument("--out", help="directory for report files")
    demo.add_argument("--format", choices=FORMATS, help="stdout rendering")

    ver = sub.add_parser("verify", help="re-check one subsystem's invariants")
    ver.add_argument("suite", choices=sorted(VERIFY_SUITES))

    bench = sub.add_parser("bench", help="time pipeline stages across toy security levels")
    bench.add_argument("--lambda", dest="lam", type=int, choices=(4, 5, 6), help="largest lambda in the sweep")
    bench.add_argument("--seed", type=int, help="coin seed for the timed runs")
    bench.add_argument("--out", help="directory for bench.json (timing report)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "demo-attack":
            return cmd_demo_attack(resolve_config(args))
        if args.command == "verify":
            return cmd_verify(args.suite)
        cfg = dict(DEFAULTS)
        if args.lam is not None:
            cfg["lambda"] = args.lam
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg["out"] = args.out
        return cmd_bench(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (E.ObflabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
