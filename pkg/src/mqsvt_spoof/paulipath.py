"""Pauli-path Fourier coefficients of mQSVT circuits and the one-path spoofer.

A path assigns an (n+1)-register Pauli string to every cut between consecutive
layers. The first and last phase layers act trivially on |0..0><0..0| and on the
computational-basis measurement, so they are absorbed into the end points and a
path holds one string per cut between the remaining ``depth - 2`` layers:
``2 d (d_U + 1)`` strings, ordered in time. Per block these are
``s_1 .. s_{d_U+1}`` around U followed by ``s~_{d_U+1} .. s~_1`` around U^dag.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Architecture, CircuitBatch, GateLayer, MqsvtCircuit, PhaseLayer
from .pauli import PauliString, all_paulis, basis_state_overlap, dense_matrix
from .simulator import OutputDistribution, x_index

PATH_SPACE_CAP = 2**24
_LOCAL = {str(p): dense_matrix(p) for p in all_paulis(2)}
_SINGLE = {str(p): dense_matrix(p) for p in all_paulis(1)}


@dataclass(frozen=True)
class PauliPath:
    strings: tuple[PauliString, ...]
    d: int
    d_U: int

    def __post_init__(self):
        if len(self.strings) != 2 * self.d * (self.d_U + 1):
            raise ValueError(f"a path for d={self.d}, d_U={self.d_U} needs {2 * self.d * (self.d_U + 1)} strings")
        k = {s.k for s in self.strings}
        if len(k) != 1:
            raise ValueError("path strings must share one register count")

    @property
    def n_plus_1(self) -> int:
        return self.strings[0].k

    def block(self, k: int) -> tuple[PauliString, ...]:
        """Strings of block ``k`` (0-based): s_1..s_{d_U+1}, s~_{d_U+1}..s~_1."""
        w = 2 * (self.d_U + 1)
        return self.strings[k * w : (k + 1) * w]

    @classmethod
    def from_strs(cls, words: Sequence[str], d: int, d_U: int) -> "PauliPath":
        return cls(tuple(PauliString.from_str(w) for w in words), d, d_U)

    def __str__(self) -> str:
        return " ".join(str(s) for s in self.strings)


def internal_layers(circ: MqsvtCircuit) -> list:
    return circ.layers()[1:-1]


# -- transitions ----------------------------------------------------------------


def gate_transition(v: np.ndarray, p_in: str, p_out: str) -> float:
    """Tr(V p V^dag q) for normalized two-qubit Paulis."""
    if p_in == "II" or p_out == "II":
        return 1.0 if p_in == p_out else 0.0
    a = _LOCAL[p_in]
    b = _LOCAL[p_out]
    return float(np.trace(v @ a @ np.conj(v.T) @ b).real) / 4.0


def phase_transition(phi: float, p_in: str, p_out: str) -> float:
    """Tr(R p R^dag q) for normalized single-qubit Paulis, R = exp(i phi Z)."""
    r = np.diag([np.exp(1j * phi), np.exp(-1j * phi)])
    return float(np.trace(r @ _SINGLE[p_in] @ np.conj(r.T) @ _SINGLE[p_out]).real) / 2.0


def layer_transition(layer: PhaseLayer | GateLayer, s_in: PauliString, s_out: PauliString) -> float:
    """<<s_out| C |s_in>> = Tr(s_out C s_in C^dag) for a single layer."""
    if s_in.k != s_out.k:
        raise ValueError("in/out strings have different lengths")
    if isinstance(layer, PhaseLayer):
        # Registers other than 0 are untouched: Kronecker delta.
        if any(s_in.letter(i) != s_out.letter(i) for i in range(1, s_in.k)):
            return 0.0
        return phase_transition(layer.phi, s_in.letter(0), s_out.letter(0))
    m = len(layer.order)
    if s_in.k != m:
        raise ValueError(f"strings have {s_in.k} registers, layer has {m}")
    val = 1.0
    for i in range(m // 2):
        a, b = int(layer.order[2 * i]), int(layer.order[2 * i + 1])
        pin = s_in.letter(a) + s_in.letter(b)
        pout = s_out.letter(a) + s_out.letter(b)
        t = gate_transition(layer.gates[i], pin, pout)
        if t == 0.0:
            return 0.0
        val *= t
    return val


def _x_bits(x, n: int) -> str:
    return "0" + format(x_index(x, n), f"0{n}b") if n else "0"


def fourier_coefficient(circ: MqsvtCircuit, path: PauliPath, x) -> float:
    """F(U, s, x) = <<0x|last>> prod_j <<s_{j+1}|C_j|s_j>> <<first|0..0>>."""
    if path.d != circ.d or path.d_U != circ.u.d_U or path.n_plus_1 != circ.n_plus_1:
        raise ValueError("path shape does not match the circuit")
    m = circ.n_plus_1
    val = basis_state_overlap(path.strings[0], "0" * m)
    if val == 0.0:
        return 0.0
    val *= basis_state_overlap(path.strings[-1], _x_bits(x, circ.n))
    if val == 0.0:
        return 0.0
    for layer, a, b in zip(internal_layers(circ), path.strings[:-1], path.strings[1:]):
        val *= layer_transition(layer, a, b)
        if val == 0.0:
            return 0.0
    return val


# -- canonical path and spoofer -------------------------------------------------


def canonical_path_r(arch: Architecture, d: int = 1) -> PauliPath:
    """Z on register 0 and its layer-1 partner first, then Z on register 0 only."""
    m = arch.n_plus_1
    first = PauliString.from_letters({0: "Z", arch.partner(0, 0): "Z"}, m)
    rest = PauliString.from_letters({0: "Z"}, m)
    count = 2 * d * (arch.d_U + 1)
    return PauliPath((first,) + (rest,) * (count - 1), d, arch.d_U)


def spoof_probability(circ: MqsvtCircuit, x) -> float:
    """q(U, x) = 2^-n + F(U, r, x)."""
    path = canonical_path_r(circ.u.architecture, circ.d)
    return 2.0**-circ.n + fourier_coefficient(circ, path, x)


@dataclass(frozen=True, eq=False)
class SpoofDistribution:
    """Raw signed q over all x (index 0 is x = 0^n) and a sampling-safe copy over x != 0^n."""

    n: int
    raw: np.ndarray
    clipped: np.ndarray

    def as_output_distribution(self) -> OutputDistribution:
        probs = np.zeros((2, 2**self.n))
        probs[0] = self.clipped
        return OutputDistribution(self.n, probs)


def spoof_distribution(circ: MqsvtCircuit) -> SpoofDistribution:
    n = circ.n
    f = canonical_coefficients(CircuitBatch.from_circuits([circ]))[0]
    # The last string of r is Z on the top register only, so F(U, r, x) is the same for all x.
    raw = np.full(2**n, 2.0**-n + f)
    clipped = np.clip(raw, 0.0, None)
    clipped[0] = 0.0
    tot = clipped.sum()
    if tot > 0:
        clipped = clipped / tot
    return SpoofDistribution(n, raw, clipped)


def _local_trace_batch(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tr(V a V^dag b)/4 for a batch of gates and per-item local Paulis."""
    vd = np.conj(np.swapaxes(v, -1, -2))
    return np.einsum("nij,njk,nkl,nli->n", v, a, vd, b).real / 4.0


def canonical_coefficients(batch: CircuitBatch) -> np.ndarray:
    """F(U, r, x) for every circuit in ``batch`` (the same for every x).

    Only gates touching register 0 carry a non-identity local Pauli along r, so
    F reduces to 2^-(n+1) times a product of local traces of those gates and of
    the interior phase gates.
    """
    m = batch.n_plus_1
    bsz = batch.size
    zi = _LOCAL["ZI"]
    iz = _LOCAL["IZ"]
    zz = _LOCAL["ZZ"]
    # Slot of register 0 in each layer's flattened order, and its gate.
    pos = np.argmax(batch.orders == 0, axis=2)  # (B, d_U)
    gate_idx = pos // 2
    slot = pos % 2
    ar = np.arange(bsz)
    f = np.full(bsz, 2.0**-m)
    for k in range(2 * batch.d):
        dagger = k % 2 == 1
        js = reversed(range(batch.d_U)) if dagger else range(batch.d_U)
        for j in js:
            v = batch.gates[ar, j, gate_idx[:, j]]
            if dagger:
                v = np.conj(np.swapaxes(v, -1, -2))
            z_here = np.where(slot[:, j, None, None] == 0, zi, iz)
            a = z_here
            b = z_here
            if k == 0 and j == 0:
                a = np.broadcast_to(zz, z_here.shape)
            f = f * _local_trace_batch(v, a, b)
        if k < 2 * batch.d - 1:
            f = f * phase_transition(batch.phases[k + 1], "Z", "Z")
    return f


# -- brute-force path sum -------------------------------------------------------


def path_space_size(n_plus_1: int, d: int, d_U: int) -> int:
    return 4 ** (n_plus_1 * 2 * d * (d_U + 1))


def transfer_matrix(layer, n_plus_1: int) -> np.ndarray:
    """T[out, in] = <<out|C|in>> over all 4**(n+1) strings, via ``layer_transition``."""
    ps = all_paulis(n_plus_1)
    t = np.empty((len(ps), len(ps)))
    for i, pin in enumerate(ps):
        for o, pout in enumerate(ps):
            t[o, i] = layer_transition(layer, pin, pout)
    return t


def enumerate_path_sum(circ: MqsvtCircuit, x, chunk: int = 2**20) -> float:
    """Sum of F(U, s, x) over every Pauli path, enumerated path by path in chunks."""
    m = circ.n_plus_1
    size = path_space_size(m, circ.d, circ.u.d_U)
    if size > PATH_SPACE_CAP:
        raise ValueError(
            f"path space has 4^{int(round(math.log(size, 4)))} = {size} paths, above the cap of 2^24"
        )
    ps = all_paulis(m)
    npl = len(ps)
    start = np.array([basis_state_overlap(p, "0" * m) for p in ps])
    end = np.array([basis_state_overlap(p, _x_bits(x, circ.n)) for p in ps])
    mats = [transfer_matrix(layer, m) for layer in internal_layers(circ)]
    length = len(mats) + 1
    total = 0.0
    for lo in range(0, size, chunk):
        ids = np.arange(lo, min(size, lo + chunk), dtype=np.int64)
        digits = np.empty((length, len(ids)), dtype=np.int64)
        rem = ids
        for pos in range(length - 1, -1, -1):
            digits[pos] = rem % npl
            rem = rem // npl
        val = start[digits[0]] * end[digits[-1]]
        for j, t in enumerate(mats):
            val = val * t[digits[j + 1], digits[j]]
        total += float(np.sum(val))
    return total


def transfer_path_sum(circ: MqsvtCircuit, x) -> float:
    """The same sum contracted as a matrix chain; a fast cross-check."""
    m = circ.n_plus_1
    ps = all_paulis(m)
    vec = np.array([basis_state_overlap(p, "0" * m) for p in ps])
    for layer in internal_layers(circ):
        vec = transfer_matrix(layer, m) @ vec
    end = np.array([basis_state_overlap(p, _x_bits(x, circ.n)) for p in ps])
    return float(end @ vec)


def all_paths(n_plus_1: int, d: int, d_U: int):
    """Iterate over every path; only for very small shapes."""
    ps = all_paulis(n_plus_1)
    for combo in itertools.product(ps, repeat=2 * d * (d_U + 1)):
        yield PauliPath(combo, d, d_U)
