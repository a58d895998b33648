"""Circuit families that carry their own attack surface.

Two layers live here.  The small one is the point-function pair: a
multi-bit point function (or the zero function of the same width) shipped
next to an encryption of its point and a locked decryption capability.
The big one is the self-contained member circuit: a single netlist that,
depending on a two-bit choice input, hands back that auxiliary material,
serves the homomorphic key chain one block at a time, or evaluates the
point function.

Every member of a family at a given width shares one template; members
differ only in the values of an initial run of constant gates (the
"description").  The template's gate list is therefore public by
construction, which is what lets an interpreter circuit be built once,
before any member is chosen.

The default template is fanout-disciplined: each wire feeds exactly one
gate and wide reuse goes through explicit COPY trees, so the compiled
evaluator stays shallow enough for a homomorphic budget to cover.  The
alternative block path computes key blocks in-circuit through the PRF;
its depth is out of any budget's reach by design, so it exists for byte
equivalence checks and is evaluated classically only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import ccobf
from . import fhe as F
from . import keyblocks as KB
from . import prf as P
from .builder import CircuitBuilder
from .circuits import BooleanCircuit, FunctionSpec, from_netlist

KINDS = ("POINT", "ZERO")
BLOCK_PATHS = ("table", "prf")

# a pad-free capability obfuscation serializes to salt + lock + pad length +
# capability id + params
OBF_BYTES = ccobf.SALT_BYTES + ccobf.LOCK_BYTES + 2 + ccobf.CAP_ID_BYTES + 5


def aux_len_bytes(lam: int) -> int:
    """Byte length of the serialized auxiliary pair: |alpha_ct| + |o|."""
    return lam * F.CT_BYTES + OBF_BYTES


def choice_bits(b: int) -> tuple[int, int]:
    """Encode the choice value 0..3 on two bits, low bit first."""
    if not 0 <= b <= 3:
        raise ValueError("choice value must be 0..3")
    return (b & 1, (b >> 1) & 1)


def _uniform_nonzero(lam: int, rng) -> tuple:
    # all-zero is excluded so a point value never collides with the zero
    # function's output; at toy widths the collision rate would be visible
    while True:
        bits = tuple(int(v) for v in rng.integers(0, 2, size=lam))
        if any(bits):
            return bits


# ---------------------------------------------------------------------------
# Member template.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemberLayout:
    """Where each description field sits in the template's constant run."""

    lam: int
    block_path: str
    n_rows: int
    body_bits: int
    aux_bits: int
    n_pay: int
    n_desc: int
    alpha_off: int
    beta_off: int
    table_off: int = -1  # table path: constant index of row 0's ok bit
    key_off: int = -1    # prf path: tape key bits
    thresh_off: int = -1  # prf path: block-count threshold bits

    def row_ok(self, i: int) -> int:
        return self.table_off + i * (1 + self.body_bits)

    def row_body(self, i: int) -> slice:
        start = self.row_ok(i) + 1
        return slice(start, start + self.body_bits)


def _selector_fanouts(b: CircuitBuilder, n_pay: int, body_bits: int, lam: int):
    """Gate wires for the three live choice branches, pre-copied to width.

    Choice encoding on inputs (0, 1): 00 aux, 10 key block, 01 point
    function, 11 reserved (everything zero).
    """
    b0 = b.fanout(0, 2)
    b1 = b.fanout(1, 2)
    nb0 = b.fanout(b.not_(b0[0]), 2)
    nb1 = b.fanout(b.not_(b1[0]), 2)
    br0 = b.and_(nb0[0], nb1[0])
    br1 = b.and_(b0[1], nb1[1])
    br2 = b.and_(nb0[1], b1[1])
    return (
        b.fanout(br0, n_pay + 1),
        b.fanout(br1, body_bits + 1),
        b.fanout(br2, lam + 1),
    )


def _table_section(b, lam, n_rows, body_bits, ok_c, body_c, x):
    """One-hot decode of the block index, XOR-selecting the addressed row.

    Returns (ok wire, body wires, per-variable spare x copies).  Every
    minterm AND cell is present for every row; which rows answer is purely
    a matter of the baked constants, so the topology never leaks the depth.
    """
    pos, neg, spare = [], [], []
    for k in range(lam):
        c3 = b.fanout(x[k], 3)
        pos.append(b.fanout(c3[0], n_rows // 2))
        neg.append(b.fanout(b.not_(c3[1]), n_rows // 2))
        spare.append(c3[2])
    pos_used = [0] * lam
    neg_used = [0] * lam
    hot = []
    for i in range(n_rows):
        lits = []
        for k in range(lam):
            if (i >> k) & 1:
                lits.append(pos[k][pos_used[k]])
                pos_used[k] += 1
            else:
                lits.append(neg[k][neg_used[k]])
                neg_used[k] += 1
        hot.append(b.fanout(b.balanced_tree(lits, b.and_), 1 + body_bits))
    ok = b.balanced_tree([b.and_(hot[i][0], ok_c[i]) for i in range(n_rows)], b.xor)
    body = [
        b.balanced_tree(
            [b.and_(hot[i][1 + j], body_c[i][j]) for i in range(n_rows)], b.xor
        )
        for j in range(body_bits)
    ]
    return ok, body, spare


def _prf_block_section(b, lam, body_bits, key_c, thresh_c, x):
    """Key block computed in-circuit: the PRF chain, the bridge packing and
    the index comparison, mirroring the scalar block generator bit for bit.

    No fanout discipline here; this section multi-reads wires freely and is
    only ever evaluated as a boolean netlist.
    """
    zero2 = b.const_bytes(b"\x00\x00")
    pad8 = [b.const(0) for _ in range(8 - lam)]
    i_byte = list(x) + pad8
    t_i = b.prf_v(key_c, b.const_bytes(b"tape") + i_byte, 2 * F.SECRET_BYTES)
    secret_w = t_i[: 8 * F.SECRET_BYTES]
    nonce_w = t_i[8 * F.SECRET_BYTES :]
    key_i = secret_w + [b.const(0) for _ in range(128 - 8 * F.SECRET_BYTES)]
    kid_w = b.prf_v(key_i, b.const_bytes(b"kid"), F.KID_BYTES)
    # i - 1 feeds the previous tape entry; at i = 0 the result is muxed away
    bor = b.const(1)
    im1 = []
    for k in range(lam):
        im1.append(b.xor(x[k], bor))
        if k + 1 < lam:
            bor = b.and_(bor, b.not_(x[k]))
    t_prev = b.prf_v(
        key_c, b.const_bytes(b"tape") + im1 + pad8, 2 * F.SECRET_BYTES
    )
    prev_w = t_prev[: 8 * F.SECRET_BYTES]
    ctx = nonce_w + zero2  # stream context at level 0
    mask_w = b.prf_v(key_i, b.const_bytes(b"mask") + ctx, F.SECRET_BYTES)
    tag_a = b.prf_v(key_i, b.const_bytes(b"tagA") + ctx, 8 * F.SECRET_BYTES)
    tag_b = b.prf_v(key_i, b.const_bytes(b"tagB") + ctx, 8 * F.SECRET_BYTES)
    masked = b.xor_v(prev_w, mask_w)
    tags = []
    for j in range(8 * F.SECRET_BYTES):
        tags += [b.mux(masked[j], tag_b[8 * j + k], tag_a[8 * j + k]) for k in range(8)]
    bridge = kid_w + b.const_bits([0] * 16) + nonce_w + masked + tags
    row0 = b.const_bytes(bytes([lam])) + kid_w
    row0 += [b.const(0) for _ in range(body_bits - len(row0))]
    is_zero = b.balanced_tree([b.not_(xk) for xk in x], b.and_)
    # ok iff the index does not exceed the baked threshold; the body is
    # blanked past it so out-of-range rows answer the same as a zero row
    le = b.const(1)
    for k in range(lam):
        le = b.mux(b.xor(x[k], thresh_c[k]), thresh_c[k], le)
    body = [
        b.and_(le, b.mux(is_zero, row0[j], bridge[j])) for j in range(body_bits)
    ]
    return le, body, list(x)


def _build_member_template(lam: int, block_path: str):
    if not 4 <= lam <= 8:
        raise ValueError("member width must be 4..8 (the block table grows as 2^lam)")
    if block_path not in BLOCK_PATHS:
        raise ValueError(f"unknown block path {block_path!r}")
    n_rows = 1 << lam
    body_bits = 8 * F.BLOCK_BYTES
    aux_bits = 8 * aux_len_bytes(lam)
    n_pay = max(aux_bits, body_bits, lam)

    b = CircuitBuilder(2 + lam)
    x = list(range(2, 2 + lam))

    # description constants come first, in layout order, so that rebinding
    # the first n_desc constant gates is all it takes to mint a member
    aux_c = [b.const(0) for _ in range(aux_bits)]
    if block_path == "table":
        table_off = aux_bits
        ok_c, body_c = [], []
        for _ in range(n_rows):
            ok_c.append(b.const(0))
            body_c.append([b.const(0) for _ in range(body_bits)])
        alpha_off = aux_bits + n_rows * (1 + body_bits)
        key_off = thresh_off = -1
    else:
        key_off = aux_bits
        thresh_off = key_off + 128
        key_c = [b.const(0) for _ in range(128)]
        thresh_c = [b.const(0) for _ in range(lam)]
        alpha_off = thresh_off + lam
        table_off = -1
    alpha_c = [b.const(0) for _ in range(lam)]
    beta_c = [b.const(0) for _ in range(lam)]
    n_desc = alpha_off + 2 * lam

    br0, br1, br2 = _selector_fanouts(b, n_pay, body_bits, lam)
    if block_path == "table":
        blk_ok, blk_body, xs = _table_section(
            b, lam, n_rows, body_bits, ok_c, body_c, x
        )
    else:
        blk_ok, blk_body, xs = _prf_block_section(
            b, lam, body_bits, key_c, thresh_c, x
        )

    # point-function branch
    match = [b.not_(b.xor(xs[k], alpha_c[k])) for k in range(lam)]
    eq = b.fanout(b.balanced_tree(match, b.and_), lam)
    point = [b.and_(eq[k], beta_c[k]) for k in range(lam)]

    # the live branches are disjoint, so XOR combines them
    ok = b.xor(b.xor(br0[n_pay], b.and_(br1[body_bits], blk_ok)), br2[lam])
    outs = [ok]
    for j in range(n_pay):
        w = b.and_(br0[j], aux_c[j])
        if j < body_bits:
            w = b.xor(w, b.and_(br1[j], blk_body[j]))
        if j < lam:
            w = b.xor(w, b.and_(br2[j], point[j]))
        outs.append(w)

    layout = MemberLayout(
        lam=lam,
        block_path=block_path,
        n_rows=n_rows,
        body_bits=body_bits,
        aux_bits=aux_bits,
        n_pay=n_pay,
        n_desc=n_desc,
        alpha_off=alpha_off,
        beta_off=alpha_off + lam,
        table_off=table_off,
        key_off=key_off,
        thresh_off=thresh_off,
    )
    return b.finish(outs), layout


_TEMPLATES: dict = {}


def member_template(lam: int, block_path: str = "table"):
    """The shared (circuit, layout) pair for width lam.  Cached; the
    returned circuit is the all-zero-description member."""
    key = (lam, block_path)
    if key not in _TEMPLATES:
        _TEMPLATES[key] = _build_member_template(lam, block_path)
    return _TEMPLATES[key]


_MBPF_TEMPLATES: dict = {}


def mbpf_template(lam: int):
    """Fixed-topology multi-bit point function: constants alpha then beta.

    Baking beta = 0 yields a circuit for the zero function on the same
    gate list.  Returns (circuit, number of description constants).
    """
    if lam not in _MBPF_TEMPLATES:
        b = CircuitBuilder(lam)
        alpha_c = [b.const(0) for _ in range(lam)]
        beta_c = [b.const(0) for _ in range(lam)]
        match = [b.not_(b.xor(k, alpha_c[k])) for k in range(lam)]
        eq = b.fanout(b.balanced_tree(match, b.and_), lam)
        _MBPF_TEMPLATES[lam] = (
            b.finish([b.and_(eq[k], beta_c[k]) for k in range(lam)]),
            2 * lam,
        )
    return _MBPF_TEMPLATES[lam]


def mbpf_member_circuit(alpha, beta) -> BooleanCircuit:
    """Template instance computing the point function alpha -> beta."""
    circuit, _ = mbpf_template(len(alpha))
    return circuit.with_const_bits(list(alpha) + list(beta))


# ---------------------------------------------------------------------------
# Auxiliary information.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuxInfo:
    """The side material handed to a distinguisher: the public key, an
    encryption of the point input (one ciphertext per bit) and a locked
    capability that recognizes encryptions of the point value."""

    pk: F.PublicKey
    alpha_ct: tuple
    o: ccobf.CCObfuscation


def _aux_parts(alpha, d, r, beta, rng):
    lam = len(alpha)
    kp = F.keygen(F.FheParams(lam, d), r)
    alpha_ct = tuple(F.enc(kp.pk, alpha, rng))
    o = ccobf.obf_cc(
        ccobf.dec_capability(kp.sk, lam), list(beta), lam=lam, rng=rng
    )
    return kp, alpha_ct, o


def sample_D(alpha, d: int, rng):
    """Fresh keys, an encryption of alpha and a capability locked to a
    uniformly chosen point value.  The secret key is returned for harness
    checks only; no attack code receives it."""
    alpha = tuple(int(a) for a in alpha)
    r = F.RandomTape.random(len(alpha), rng)
    beta = _uniform_nonzero(len(alpha), rng)
    kp, alpha_ct, o = _aux_parts(alpha, d, r, beta, rng)
    return AuxInfo(kp.pk, alpha_ct, o), kp.sk


def _coin_words(alpha, d, r, beta_seed):
    padded = list(alpha) + [0] * (-len(alpha) % 8)
    material = (
        b"aux-coins/"
        + r.key16()
        + P.bits_to_bytes(padded)
        + bytes([len(alpha)])
        + int(d).to_bytes(2, "big")
        + int(beta_seed).to_bytes(8, "little")
    )
    return [int(w) for w in np.frombuffer(P.prf_hash(material, 32), dtype=np.uint64)]


def sample_D_r(alpha, d: int, r: F.RandomTape, beta=None, beta_seed: int = 0):
    """Coin-fixed variant of sample_D: keys derive from the tape r, and the
    encryption and capability coins derive from (alpha, d, r, beta_seed),
    so the same arguments always produce byte-identical output.  beta may
    be pinned explicitly; by default it is drawn from the derived coins.

    Returns only (alpha_ct, o): both byte sizes depend on lam alone, never
    on d, which is what lets a member circuit stay size-oblivious about
    the depth it serves.
    """
    alpha = tuple(int(a) for a in alpha)
    rng = np.random.default_rng(_coin_words(alpha, d, r, beta_seed))
    if beta is None:
        beta = _uniform_nonzero(len(alpha), rng)
    _, alpha_ct, o = _aux_parts(alpha, d, r, tuple(int(v) for v in beta), rng)
    return alpha_ct, o


# ---------------------------------------------------------------------------
# Members.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyMember:
    """One baked member circuit plus everything that went into it.

    beta is the lock value carried by the capability; the point-function
    branch returns it only for POINT members, ZERO members answer all
    zeros there while keeping the identical gate list.
    """

    kind: str
    lam: int
    alpha: tuple
    beta: tuple
    d: int
    r: F.RandomTape
    rp: F.RandomTape
    aux: tuple  # (alpha_ct, o)
    block_path: str = "table"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown member kind {self.kind!r}")
        if not (len(self.alpha) == len(self.beta) == self.lam):
            raise ValueError("alpha and beta must be lam bits")
        if len(self.r.bits) != self.lam or len(self.rp.bits) != self.lam:
            raise ValueError("tapes must be lam bits")
        if not 0 <= self.d < (1 << self.lam):
            raise ValueError(
                f"depth {self.d} needs more than 2^lam - 1 = {(1 << self.lam) - 1} "
                "key blocks; raise lam"
            )
        alpha_ct, o = self.aux
        if len(alpha_ct) != self.lam:
            raise ValueError("auxiliary encryption must carry lam ciphertexts")
        if any(ct.level != self.d for ct in alpha_ct):
            raise ValueError("auxiliary ciphertexts must sit at the member's depth")
        if not isinstance(o, ccobf.CCObfuscation):
            raise ValueError("auxiliary capability must be a CCObfuscation")

    @property
    def K(self) -> int:
        """Largest block index the member serves."""
        return KB.blocks_needed(self.lam, self.d, "bootstrapped")

    @cached_property
    def layout(self) -> MemberLayout:
        return member_template(self.lam, self.block_path)[1]

    @cached_property
    def desc_bits(self) -> tuple:
        lay = self.layout
        baked = self.beta if self.kind == "POINT" else (0,) * self.lam
        bits = list(P.bytes_to_bits(self.aux_bytes))
        if self.block_path == "table":
            for i in range(lay.n_rows):
                if i <= self.K:
                    body = KB.block_gen(self.lam, i, self.r, self.rp, "bootstrapped").body
                    bits.append(1)
                    bits += P.bytes_to_bits(body.ljust(F.BLOCK_BYTES, b"\x00"))
                else:
                    bits.append(0)
                    bits += [0] * lay.body_bits
        else:
            bits += P.bytes_to_bits(self.r.key16())
            bits += P.int_to_bits(self.K, self.lam)
        bits += list(self.alpha) + list(baked)
        return tuple(bits)

    @cached_property
    def circuit(self) -> BooleanCircuit:
        return member_template(self.lam, self.block_path)[0].with_const_bits(
            self.desc_bits
        )

    @property
    def aux_bytes(self) -> bytes:
        alpha_ct, o = self.aux
        return F.cts_to_bytes(alpha_ct) + o.to_bytes()

    def run(self, b: int, x):
        """Evaluate the case split; returns (ok bit, payload bits)."""
        bits = self.circuit.eval(list(choice_bits(b)) + [int(v) for v in x])
        return bits[0], tuple(bits[1:])


def build_member(kind, alpha, beta, d, r, rp, aux, block_path="table") -> FamilyMember:
    """Bake one member.  aux is the (alpha_ct, o) pair for these very keys,
    normally from sample_D_r(alpha, d, r); the constructor cross-checks the
    ciphertext levels against d so a mismatched pairing fails loudly."""
    return FamilyMember(
        kind=str(kind),
        lam=len(tuple(alpha)),
        alpha=tuple(int(a) for a in alpha),
        beta=tuple(int(v) for v in beta),
        d=int(d),
        r=r,
        rp=rp,
        aux=(tuple(aux[0]), aux[1]),
        block_path=block_path,
    )


def build_aux_member_v4(kind, alpha, beta, aux: AuxInfo):
    """The bare pair variant: a point-function spec next to its AuxInfo.

    The returned FunctionSpec is the reference semantics; candidates
    compile it onto the shared point-function template so the interpreter
    stays member-independent.
    """
    alpha = tuple(int(a) for a in alpha)
    beta = tuple(int(v) for v in beta)
    if kind not in KINDS:
        raise ValueError(f"unknown member kind {kind!r}")
    if len(aux.alpha_ct) != len(alpha):
        raise ValueError("auxiliary encryption width mismatch")
    if kind == "POINT":
        spec = FunctionSpec("MULTIBIT_POINT", len(alpha), target=alpha, payload=beta)
    else:
        spec = FunctionSpec("ZERO", len(alpha))
    return spec, aux


# ---------------------------------------------------------------------------
# Payload parsing.
# ---------------------------------------------------------------------------


def parse_aux_payload(lam: int, payload):
    """Split a choice-0 payload into (alpha_ct tuple, capability)."""
    need = 8 * aux_len_bytes(lam)
    data = P.bits_to_bytes([int(v) for v in payload[:need]])
    cut = lam * F.CT_BYTES
    return tuple(F.cts_from_bytes(data[:cut])), ccobf.cc_from_bytes(data[cut:])


def parse_block_payload(i: int, payload) -> KB.KeyBlock:
    """Reassemble the key block a choice-1 row answered for index i.

    The member returns the block body zero-padded to a fixed width; the
    index and strategy are the caller's own context, so carrying them in
    the row would only duplicate what the query already pinned down.
    """
    body = P.bits_to_bytes([int(v) for v in payload[: 8 * F.BLOCK_BYTES]])
    size = F.BLOCK0_BYTES if i == 0 else F.BLOCK_BYTES
    return KB.KeyBlock(i, "bootstrapped", body[:size])


def parse_value_payload(lam: int, payload) -> tuple:
    """The point-function value bits of a choice-2 payload."""
    return tuple(int(v) for v in payload[:lam])


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------


class ParsedMember(NamedTuple):
    kind: str
    lam: int
    d: int | None
    block_path: str
    circuit: BooleanCircuit


def member_to_text(member: FamilyMember, redact_depth: bool = False) -> str:
    """Header plus netlist.  With redact_depth the serving depth is masked,
    which is the form an attacker-facing copy takes; the circuit itself is
    identical either way."""
    d = "?" if redact_depth else str(member.d)
    head = (
        f"member kind={member.kind} lam={member.lam} d={d} "
        f"path={member.block_path}"
    )
    return head + "\n" + member.circuit.to_netlist()


def member_from_text(text: str) -> ParsedMember:
    head, _, rest = text.partition("\n")
    fields = dict(tok.split("=", 1) for tok in head.split()[1:])
    if not head.startswith("member ") or set(fields) != {"kind", "lam", "d", "path"}:
        raise ValueError("malformed member header")
    return ParsedMember(
        kind=fields["kind"],
        lam=int(fields["lam"]),
        d=None if fields["d"] == "?" else int(fields["d"]),
        block_path=fields["path"],
        circuit=from_netlist(rest),
    )
