"""Haar moments of two-qubit Pauli tensors.

Exact values come from the Weingarten expansion

    G(p; q) = 2^{-2t} sum_{sigma, tau} Wg(sigma^{-1} tau) Tr(W_sigma^dag P) Tr(W_tau Q)

over S_t with d = 4, where ``P``/``Q`` are the bare tensors of the inputs and
outputs. Traces of permuted Pauli tensors are evaluated symbolically cycle by
cycle, tracking the phase of every cycle product. A Monte-Carlo estimator over
sampled Haar gates is provided as an independent cross-check.

``W_pi`` is the operator with ``W_pi |i_1 .. i_k> = |i_{pi(1)} .. i_{pi(k)}>``, for
which ``Tr(W_pi Q_1 x .. x Q_k)`` is the product over cycles ``(a, pi(a), ..)`` of
``Tr(Q_a Q_{pi(a)} ..)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .haar import STREAM_MOMENT, child_rng, haar_unitary
from .pauli import PauliString, dense_matrix, phase_power

Permutation = tuple[int, ...]
CyclePartition = tuple[int, ...]

DIM = 4
DELTA = 20160  # d^2 (d^2-1)(d^2-4)(d^2-9) at d = 4
T4_DENOMINATOR = 2**8 * DELTA  # 5160960

# Weingarten function of U(4) on S_4, as numerators over DELTA. The [2,2]
# entry is (d^2 + 6) = 22; it is cross-checked against the inverse Gram matrix
# of the permutation operators in the tests.
WEINGARTEN_S4: dict[CyclePartition, Fraction] = {
    (4,): Fraction(-20, DELTA),
    (3, 1): Fraction(29, DELTA),
    (2, 2): Fraction(22, DELTA),
    (2, 1, 1): Fraction(-48, DELTA),
    (1, 1, 1, 1): Fraction(134, DELTA),
}

WEINGARTEN_S2: dict[CyclePartition, Fraction] = {
    (2,): Fraction(-1, DIM * (DIM**2 - 1)),
    (1, 1): Fraction(1, DIM**2 - 1),
}


# -- permutations -----------------------------------------------------------


def identity_perm(k: int) -> Permutation:
    return tuple(range(k))


def compose(a: Permutation, b: Permutation) -> Permutation:
    """(a . b)(i) = a[b[i]]."""
    return tuple(a[i] for i in b)


def inverse(p: Permutation) -> Permutation:
    out = [0] * len(p)
    for i, v in enumerate(p):
        out[v] = i
    return tuple(out)


def cycles(p: Permutation) -> list[tuple[int, ...]]:
    """Cycles ``(a, p[a], p[p[a]], ..)`` starting from their smallest element."""
    if sorted(p) != list(range(len(p))):
        raise ValueError(f"not a permutation: {p!r}")
    seen: set[int] = set()
    out = []
    for start in range(len(p)):
        if start in seen:
            continue
        cyc = []
        j = start
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = p[j]
        out.append(tuple(cyc))
    return out


def cyclic_partition(p: Permutation) -> CyclePartition:
    """Cycle lengths in non-increasing order."""
    if len(p) > 8:
        raise ValueError("cyclic_partition supports k <= 8")
    return tuple(sorted((len(c) for c in cycles(p)), reverse=True))


def weingarten_s4(part: CyclePartition) -> Fraction:
    part = tuple(sorted(part, reverse=True))
    try:
        return WEINGARTEN_S4[part]
    except KeyError:
        raise ValueError(f"not a cycle type of S_4: {part!r}") from None


def weingarten(part: CyclePartition) -> Fraction:
    part = tuple(sorted(part, reverse=True))
    table = {2: WEINGARTEN_S2, 4: WEINGARTEN_S4}.get(sum(part))
    if table is None or part not in table:
        raise ValueError(f"no Weingarten value for {part!r} at d=4")
    return table[part]


# -- permuted Pauli traces ----------------------------------------------------


def _as_pauli(p) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString.from_str(p)


def _trace_exact(perm: Permutation, paulis: Sequence[PauliString]) -> tuple[int, int] | None:
    """``(e, c)`` with Tr(W_perm Q_1..Q_k) = i^e 4^c, or None when it vanishes."""
    e_total = 0
    cycs = cycles(perm)
    for cyc in cycs:
        acc = paulis[cyc[0]]
        e = 0
        for j in cyc[1:]:
            de, acc = phase_power(acc, paulis[j])
            e += de
        if not acc.is_identity:
            return None
        e_total += e
    return e_total % 4, len(cycs)


def permutation_trace(perm: Permutation, paulis: Sequence) -> complex:
    """Tr(W_perm Q_1 x .. x Q_k) for bare two-qubit Paulis, evaluated exactly."""
    if len(perm) > 6:
        raise ValueError("permutation_trace supports k <= 6")
    qs = [_as_pauli(p) for p in paulis]
    if len(qs) != len(perm):
        raise ValueError("one Pauli per permuted slot is required")
    if any(q.k != 2 for q in qs):
        raise ValueError("permutation_trace expects two-qubit Paulis")
    res = _trace_exact(tuple(perm), qs)
    if res is None:
        return 0j
    e, c = res
    return complex((1j) ** e * 4**c)


# -- exact moments --------------------------------------------------------------


@dataclass(frozen=True)
class MomentEntry:
    """An exact Haar-moment value."""

    value: Fraction

    def __float__(self) -> float:
        return float(self.value)

    @property
    def numerator_over_t4(self) -> Fraction:
        """The value as a numerator over 2^8 * DELTA."""
        return self.value * T4_DENOMINATOR

    def __str__(self) -> str:
        return f"{self.value} ({float(self.value):.7g})"


@lru_cache(maxsize=None)
def _perm_tables(t: int):
    perms = list(itertools.permutations(range(t)))
    wg = [[weingarten(cyclic_partition(compose(inverse(s), u))) for u in perms] for s in perms]
    invs = [inverse(s) for s in perms]
    return perms, invs, wg


_I_POW = ((1, 0), (0, 1), (-1, 0), (0, -1))


@lru_cache(maxsize=200_000)
def _moment_exact(ins: tuple[PauliString, ...], outs: tuple[PauliString, ...]) -> Fraction:
    t = len(ins)
    perms, invs, wg = _perm_tables(t)
    left = [_trace_exact(si, ins) for si in invs]  # Tr(W_sigma^dag P)
    right = [_trace_exact(u, outs) for u in perms]
    re = Fraction(0)
    im = Fraction(0)
    for a, la in enumerate(left):
        if la is None:
            continue
        for b, rb in enumerate(right):
            if rb is None:
                continue
            cr, ci = _I_POW[(la[0] + rb[0]) % 4]
            mag = wg[a][b] * 4 ** (la[1] + rb[1])
            re += cr * mag
            im += ci * mag
    if im != 0:
        raise ArithmeticError("Haar moment of Hermitian inputs came out complex")
    return re / 2 ** (2 * t)


def moment_weingarten(paulis_in: Sequence, paulis_out: Sequence) -> MomentEntry:
    """Exact G(p_1..p_t; q_1..q_t) for normalized two-qubit Paulis, t in {2, 4}."""
    ins = tuple(_as_pauli(p) for p in paulis_in)
    outs = tuple(_as_pauli(p) for p in paulis_out)
    if len(ins) != len(outs) or len(ins) not in (2, 4):
        raise ValueError("need t = 2 or t = 4 input and output Paulis")
    if any(p.k != 2 for p in ins + outs):
        raise ValueError("moments are defined for two-qubit Paulis")
    return MomentEntry(_moment_exact(ins, outs))


def moment_t4_weingarten(r, rt, s, st, rp, rtp, sp, stp) -> MomentEntry:
    """G(r, r~, s, s~; r', r~', s', s~') by the full Weingarten double sum."""
    return moment_weingarten((r, rt, s, st), (rp, rtp, sp, stp))


def moment_t2(s, st, sp, stp) -> MomentEntry:
    """Closed-form second moment G(s, s~; s', s~')."""
    s, st, sp, stp = (_as_pauli(p) for p in (s, st, sp, stp))
    if s != st or sp != stp:
        return MomentEntry(Fraction(0))
    if s.is_identity and sp.is_identity:
        return MomentEntry(Fraction(1))
    if s.is_identity or sp.is_identity:
        return MomentEntry(Fraction(0))
    return MomentEntry(Fraction(1, 15))


# -- tabulated fourth moments ---------------------------------------------------

NOT_ZI_II = tuple(
    lbl for lbl in (a + b for a in "IXYZ" for b in "IXYZ") if lbl not in ("ZI", "II")
)


def _t4(num: int) -> Fraction:
    return Fraction(num, T4_DENOMINATOR)


def moment_t4_table(r, rt, s, st, rp, rtp, sp, stp) -> MomentEntry:
    """Hard-coded case table for the three left blocks used by the spoofing path.

    The left block ``(r, r~; r', r~')`` must be ``(ZI, ZI; ZI, ZI)``,
    ``(II, II; II, II)`` or ``(ZZ, ZI; ZI, ZI)``. These are the tabulated
    constants, kept verbatim so they can be compared with ``moment_t4_weingarten``.
    """
    r, rt, s, st, rp, rtp, sp, stp = (str(_as_pauli(p)) for p in (r, rt, s, st, rp, rtp, sp, stp))
    block = (r, rt, rp, rtp)
    same_in, same_out = s == st, sp == stp
    pair = frozenset((s, st))
    if block == ("ZI", "ZI", "ZI", "ZI"):
        if same_in and same_out:
            if s == sp == "ZI":
                return MomentEntry(_t4(90048))
            if s == sp == "II":
                return MomentEntry(_t4(602048))
            if s in NOT_ZI_II and sp in NOT_ZI_II:
                return MomentEntry(_t4(31680))
            if (s == "ZI" and sp in NOT_ZI_II) or (s in NOT_ZI_II and sp == "ZI"):
                return MomentEntry(_t4(18368))
        return MomentEntry(Fraction(0))
    if block == ("II", "II", "II", "II"):
        if same_in and same_out:
            if s == sp == "II":
                return MomentEntry(Fraction(1))
            if s != "II" and sp != "II":
                return MomentEntry(_t4(31680))
        return MomentEntry(Fraction(0))
    if block == ("ZZ", "ZI", "ZI", "ZI"):
        xy_pairs = {frozenset((p + "X", p + "Y")) for p in "IXYZ"}
        if same_out and sp == "ZI":
            if pair == {"ZZ", "ZI"}:
                return MomentEntry(_t4(95232))
            if pair in xy_pairs:
                return MomentEntry(_t4(-121920))
            if pair == {"IZ", "II"}:
                return MomentEntry(_t4(73664))
        if same_out and sp in NOT_ZI_II:
            if pair == {"ZZ", "ZI"}:
                return MomentEntry(_t4(-6656))
            if pair in xy_pairs:
                return MomentEntry(_t4(12224))
            if pair == {"IZ", "II"}:
                return MomentEntry(_t4(960))
        return MomentEntry(Fraction(0))
    raise ValueError(f"left block {block} is not covered by the tabulated cases")


@dataclass(frozen=True)
class TableCase:
    """One nonzero row of the tabulated moments plus all concrete Pauli instances."""

    name: str
    t: int
    tabulated: Fraction
    instances: tuple[tuple[str, ...], ...]  # (ins..., outs...) label tuples

    @property
    def representative(self) -> tuple[str, ...]:
        return self.instances[0]

    def exact(self, instance: tuple[str, ...] | None = None) -> Fraction:
        inst = self.representative if instance is None else instance
        return moment_weingarten(inst[: self.t], inst[self.t :]).value


def _set_orders(a: str, b: str) -> list[tuple[str, str]]:
    return [(a, b), (b, a)]


def table_cases() -> list[TableCase]:
    """The sixteen tabulated rows: three second-moment and thirteen fourth-moment cases."""
    nz = NOT_ZI_II
    non_id = tuple(l for l in (a + b for a in "IXYZ" for b in "IXYZ") if l != "II")
    cases = [
        TableCase("t2/s=s~=s'=s~'=II", 2, Fraction(1), (("II", "II", "II", "II"),)),
        TableCase(
            "t2/s=s~!=II,s'=s~'!=II", 2, Fraction(1, 15),
            tuple((a, a, b, b) for a in ("ZZ",) + non_id for b in ("XY",) + non_id),
        ),
        TableCase("t2/s!=s~", 2, Fraction(0), (("ZZ", "ZI", "ZI", "ZI"), ("XX", "XY", "ZZ", "ZZ"))),
    ]
    zi = ("ZI", "ZI")
    ii = ("II", "II")
    cases += [
        TableCase("t4/ZI-block/s=s~=s'=s~'=ZI", 4, _t4(90048), (zi + ("ZI", "ZI") + zi + ("ZI", "ZI"),)),
        TableCase(
            "t4/ZI-block/s=s~,s'=s~' not in {ZI,II}", 4, _t4(31680),
            tuple(zi + (a, a) + zi + (b, b) for a in nz for b in nz),
        ),
        TableCase(
            "t4/ZI-block/s=s~=ZI,s'=s~' not in {ZI,II}", 4, _t4(18368),
            tuple(zi + ("ZI", "ZI") + zi + (b, b) for b in nz),
        ),
        TableCase(
            "t4/ZI-block/s=s~ not in {ZI,II},s'=s~'=ZI", 4, _t4(18368),
            tuple(zi + (a, a) + zi + ("ZI", "ZI") for a in nz),
        ),
        TableCase("t4/ZI-block/s=s~=s'=s~'=II", 4, _t4(602048), (zi + ii + zi + ii,)),
        TableCase("t4/II-block/all II", 4, Fraction(1), (ii + ii + ii + ii,)),
        TableCase(
            "t4/II-block/s=s~!=II,s'=s~'!=II", 4, _t4(31680),
            (ii + ("XX", "XX") + ii + ("YZ", "YZ"),)
            + tuple(ii + (a, a) + ii + (b, b) for a in non_id for b in non_id),
        ),
    ]
    zz_zi = ("ZZ", "ZI")
    xy = [o for p in "IXYZ" for o in _set_orders(p + "X", p + "Y")]
    cases += [
        TableCase(
            "t4/ZZ,ZI-block/{s,s~}={ZZ,ZI},s'=s~'=ZI", 4, _t4(95232),
            tuple(zz_zi + o + zi + ("ZI", "ZI") for o in _set_orders("ZZ", "ZI")),
        ),
        TableCase(
            "t4/ZZ,ZI-block/{s,s~}={PX,PY},s'=s~'=ZI", 4, _t4(-121920),
            tuple(zz_zi + o + zi + ("ZI", "ZI") for o in xy),
        ),
        TableCase(
            "t4/ZZ,ZI-block/{s,s~}={IZ,II},s'=s~'=ZI", 4, _t4(73664),
            tuple(zz_zi + o + zi + ("ZI", "ZI") for o in _set_orders("IZ", "II")),
        ),
        TableCase(
            "t4/ZZ,ZI-block/{s,s~}={ZZ,ZI},s'=s~' not in {ZI,II}", 4, _t4(-6656),
            tuple(zz_zi + o + zi + (b, b) for o in _set_orders("ZZ", "ZI") for b in nz),
        ),
        TableCase(
            "t4/ZZ,ZI-block/{s,s~}={PX,PY},s'=s~' not in {ZI,II}", 4, _t4(12224),
            tuple(zz_zi + o + zi + (b, b) for o in xy for b in nz),
        ),
        TableCase(
            "t4/ZZ,ZI-block/{s,s~}={IZ,II},s'=s~' not in {ZI,II}", 4, _t4(960),
            tuple(zz_zi + o + zi + (b, b) for o in _set_orders("IZ", "II") for b in nz),
        ),
    ]
    return cases


def tabulated_value(case: TableCase, instance: tuple[str, ...] | None = None) -> Fraction:
    inst = case.representative if instance is None else instance
    if case.t == 2:
        return moment_t2(*inst).value
    return moment_t4_table(*inst).value


def xy_row_dependence() -> dict[str, dict[str, Fraction]]:
    """Exact values of the {PX, PY} rows for each P, to expose any P-dependence."""
    out: dict[str, dict[str, Fraction]] = {}
    for p in "IXYZ":
        vals = {}
        for sp in ("ZI",) + NOT_ZI_II:
            vals[sp] = moment_t4_weingarten("ZZ", "ZI", p + "X", p + "Y", "ZI", "ZI", sp, sp).value
        out[p] = vals
    return out


# -- Monte-Carlo oracle ---------------------------------------------------------

MC_CHUNK = 50_000


def _mc_chunk(ins: list[np.ndarray | None], outs: list[np.ndarray | None], size: int, rng) -> np.ndarray:
    v = haar_unitary(DIM, rng, size=(size,))
    vd = np.conj(np.swapaxes(v, -1, -2))
    acc = np.ones(size)
    for p, q in zip(ins, outs):
        if p is None:
            continue
        # Tr(V p V^dag q) is real for Hermitian p, q.
        acc = acc * np.einsum("nij,jk,nkl,li->n", v, p, vd, q).real
    return acc


def moment_mc(paulis_in: Sequence, paulis_out: Sequence, t: int, samples: int, seed: int) -> tuple[float, float]:
    """Sample mean and standard error of prod_i Tr(V p_i V^dag q_i) over Haar V.

    Copies whose input and output are both II contribute exactly 1; copies with
    exactly one II contribute exactly 0. The budget is split into fixed chunks
    seeded by counter, so the result is reproducible per seed.
    """
    if samples < 100:
        raise ValueError("moment_mc needs at least 100 samples")
    ins = [_as_pauli(p) for p in paulis_in]
    outs = [_as_pauli(p) for p in paulis_out]
    if len(ins) != t or len(outs) != t:
        raise ValueError(f"expected {t} input and {t} output Paulis")
    mats_in: list[np.ndarray | None] = []
    mats_out: list[np.ndarray | None] = []
    for p, q in zip(ins, outs):
        if p.is_identity and q.is_identity:
            mats_in.append(None)
            mats_out.append(None)
        elif p.is_identity or q.is_identity:
            return 0.0, 0.0
        else:
            mats_in.append(dense_matrix(p, normalized=True))
            mats_out.append(dense_matrix(q, normalized=True))
    if all(m is None for m in mats_in):
        return 1.0, 0.0
    parts = []
    done = 0
    chunk = 0
    while done < samples:
        size = min(MC_CHUNK, samples - done)
        parts.append(_mc_chunk(mats_in, mats_out, size, child_rng(seed, STREAM_MOMENT, chunk)))
        done += size
        chunk += 1
    vals = np.concatenate(parts)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def moment_dense(paulis_in: Sequence, paulis_out: Sequence) -> float:
    """Brute-force G via the commutant projection on (C^4)^{x t} (t <= 4).

    Builds every permutation operator as a dense matrix and inverts their Gram
    matrix numerically; independent of the symbolic trace rule above.
    """
    ins = [_as_pauli(p) for p in paulis_in]
    outs = [_as_pauli(p) for p in paulis_out]
    t = len(ins)
    ws = [dense_permutation_operator(p, DIM) for p in itertools.permutations(range(t))]
    gram = np.array([[np.trace(a.conj().T @ b) for b in ws] for a in ws])
    wg = np.linalg.inv(gram)
    a_op = _kron_all(dense_matrix(p, normalized=True) for p in ins)
    b_op = _kron_all(dense_matrix(q, normalized=True) for q in outs)
    ta = np.array([np.trace(w.conj().T @ a_op) for w in ws])
    tb = np.array([np.trace(w @ b_op) for w in ws])
    return float((ta @ wg @ tb).real)


def _kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def dense_permutation_operator(perm: Permutation, dim: int) -> np.ndarray:
    """Dense W_perm with W |i_1..i_k> = |i_{perm(1)}..i_{perm(k)}>."""
    k = len(perm)
    size = dim**k
    idx = np.arange(size)
    digits = np.array(np.unravel_index(idx, (dim,) * k))  # (k, size)
    out_digits = digits[list(perm), :]
    out_idx = np.ravel_multi_index(tuple(out_digits), (dim,) * k)
    w = np.zeros((size, size))
    w[out_idx, idx] = 1.0
    return w
