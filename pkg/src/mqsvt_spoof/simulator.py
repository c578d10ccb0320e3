"""Statevector and density-matrix simulation of mQSVT circuits.

All simulation runs on batches of shape ``(B, 2**m)``: an ensemble of circuits,
a set of noise trajectories, or a single circuit with ``B = 1``. A matching
layer is applied by gathering amplitudes into an order where every gate acts on
adjacent qubits, contracting the 4x4 gates, and scattering back.

Density matrices are simulated as vectors on ``2m`` qubits (row register ``r``
at position ``r``, column register ``r`` at ``m + r``), which lets the same
kernel apply ``U`` to the rows and ``conj(U)`` to the columns.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .circuit import CircuitBatch, MqsvtCircuit, NoiseSpec
from .haar import STREAM_NOISE, STREAM_SAMPLING, child_rng

MAX_REGISTERS = 12
MAX_DENSITY_REGISTERS = 7
TRAJECTORY_CHUNK = 2048


# -- kernel ---------------------------------------------------------------------


def gather_index(orders: np.ndarray, m: int) -> np.ndarray:
    """``idx[b, c]``: flat index whose qubit at canonical slot ``k`` is register ``orders[b, k]``."""
    c = np.arange(2**m, dtype=np.int64)
    bits = (c[None, :] >> (m - 1 - np.arange(m, dtype=np.int64))[:, None]) & 1
    weights = np.left_shift(np.int64(1), (m - 1 - orders).astype(np.int64))
    return weights @ bits


def apply_matching_layer(psi: np.ndarray, orders: np.ndarray, gates: np.ndarray) -> np.ndarray:
    """Apply disjoint two-qubit gates to a batch of vectors.

    ``orders``: (B, m) registers flattened pair by pair; ``gates``: (B, m/2, 4, 4).
    """
    bsz, size = psi.shape
    m = orders.shape[1]
    idx = gather_index(orders, m)
    x = np.take_along_axis(psi, idx, axis=1).reshape((bsz,) + (4,) * (m // 2))
    for j in range(m // 2):
        x = np.moveaxis(x, j + 1, -1)
        x = np.einsum("bij,b...j->b...i", gates[:, j], x)
        x = np.moveaxis(x, -1, j + 1)
    out = np.empty_like(psi)
    np.put_along_axis(out, idx, x.reshape(bsz, size), axis=1)
    return out


def apply_phase(psi: np.ndarray, phi: float, m: int) -> np.ndarray:
    """exp(i phi Z) on register 0."""
    half = 2 ** (m - 1)
    out = psi.copy()
    out[:, :half] *= np.exp(1j * phi)
    out[:, half:] *= np.exp(-1j * phi)
    return out


def batch_layers(batch: CircuitBatch) -> Iterator[tuple]:
    """Yield ``("phase", phi)`` or ``("gate", orders, gates)`` in time order."""
    yield ("phase", batch.phases[0])
    d_U = batch.d_U
    for k in range(2 * batch.d):
        if k % 2 == 0:
            for j in range(d_U):
                yield ("gate", batch.orders[:, j], batch.gates[:, j])
        else:
            for j in reversed(range(d_U)):
                yield ("gate", batch.orders[:, j], np.conj(np.swapaxes(batch.gates[:, j], -1, -2)))
        yield ("phase", batch.phases[k + 1])


def _as_batch(circ) -> CircuitBatch:
    return circ if isinstance(circ, CircuitBatch) else CircuitBatch.from_circuits([circ])


def _check_size(m: int, cap: int = MAX_REGISTERS):
    if m > cap:
        raise ValueError(f"{m} registers exceeds the simulation cap of {cap}")


def evolve_batch(batch: CircuitBatch) -> np.ndarray:
    m = batch.n_plus_1
    _check_size(m)
    psi = np.zeros((batch.size, 2**m), dtype=complex)
    psi[:, 0] = 1.0
    for layer in batch_layers(batch):
        if layer[0] == "phase":
            psi = apply_phase(psi, layer[1], m)
        else:
            psi = apply_matching_layer(psi, layer[1], layer[2])
    return psi


def evolve(circ: MqsvtCircuit) -> np.ndarray:
    """Final state from |0..0>, flat index with register 0 as the top bit."""
    return evolve_batch(_as_batch(circ))[0]


def circuit_unitary(circ: MqsvtCircuit) -> np.ndarray:
    """Dense circuit unitary, column ``j`` is the image of basis state ``j``."""
    m = circ.n_plus_1
    _check_size(m, 8)
    batch = _as_batch(circ)
    size = 2**m
    rep = CircuitBatch(m, batch.d, batch.phases, np.repeat(batch.orders, size, 0), np.repeat(batch.gates, size, 0))
    psi = np.eye(size, dtype=complex)
    for layer in batch_layers(rep):
        if layer[0] == "phase":
            psi = apply_phase(psi, layer[1], m)
        else:
            psi = apply_matching_layer(psi, layer[1], layer[2])
    return psi.T


# -- distributions --------------------------------------------------------------


def _bits(v: int, n: int) -> str:
    return format(v, f"0{n}b") if n else ""


def x_index(x, n: int) -> int:
    if isinstance(x, str):
        if len(x) != n or set(x) - {"0", "1"}:
            raise ValueError(f"expected an {n}-bit string, got {x!r}")
        return int(x, 2)
    x = int(x)
    if not 0 <= x < 2**n:
        raise ValueError(f"x out of range for n={n}")
    return x


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """Joint output probabilities ``probs[top_bit, x]`` of shape ``(2, 2**n)``."""

    n: int
    probs: np.ndarray

    def p(self, x, top: int = 0) -> float:
        return float(self.probs[top, x_index(x, self.n)])

    @property
    def top_zero_mass(self) -> float:
        return float(self.probs[0].sum())

    def conditional(self) -> np.ndarray:
        """Distribution of x given top bit 0."""
        mass = self.probs[0].sum()
        if mass <= 0:
            raise ValueError("top-zero mass is zero")
        return self.probs[0] / mass

    def as_dict(self) -> dict[tuple[int, str], float]:
        return {(b, _bits(x, self.n)): float(self.probs[b, x]) for b in (0, 1) for x in range(2**self.n)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("top,x,probability\n")
        for b in (0, 1):
            for x in range(2**self.n):
                buf.write(f"{b},{_bits(x, self.n)},{self.probs[b, x]!r}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "probs": {f"{b}|{_bits(x, self.n)}": float(self.probs[b, x]) for b in (0, 1) for x in range(2**self.n)},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OutputDistribution":
        doc = json.loads(text)
        n = int(doc["n"])
        probs = np.zeros((2, 2**n))
        for key, v in doc["probs"].items():
            b, x = key.split("|")
            probs[int(b), int(x, 2) if x else 0] = v
        return cls(n, probs)


def _to_probs(psi: np.ndarray, m: int) -> np.ndarray:
    return (np.abs(psi) ** 2).reshape(psi.shape[0], 2, 2 ** (m - 1))


def ensemble_probabilities(batch: CircuitBatch) -> np.ndarray:
    """Joint output probabilities, shape ``(B, 2, 2**n)``."""
    return _to_probs(evolve_batch(batch), batch.n_plus_1)


def full_distribution(circ: MqsvtCircuit) -> OutputDistribution:
    return OutputDistribution(circ.n, ensemble_probabilities(_as_batch(circ))[0])


def output_probability(circ: MqsvtCircuit, x) -> float:
    """|<0x|circ|0..0>|^2, not renormalized by the postselection probability."""
    psi = evolve(circ)
    return float(abs(psi[x_index(x, circ.n)]) ** 2)


# -- noise ----------------------------------------------------------------------


def _parity_table(m: int) -> np.ndarray:
    v = np.arange(2**m, dtype=np.int64)
    par = np.zeros_like(v)
    while v.any():
        par ^= v & 1
        v = v >> 1
    return par


def _random_paulis(rng: np.random.Generator, bsz: int, m: int, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """X and Z masks for one noise layer; each register is hit with probability gamma
    by a uniform element of {I, X, Y, Z}."""
    hit = rng.random((bsz, m)) < gamma
    letter = rng.integers(0, 4, size=(bsz, m))
    xb = hit & ((letter == 1) | (letter == 2))
    zb = hit & ((letter == 2) | (letter == 3))
    w = np.left_shift(np.int64(1), np.arange(m - 1, -1, -1, dtype=np.int64))
    return xb.astype(np.int64) @ w, zb.astype(np.int64) @ w


def _apply_pauli_masks(psi: np.ndarray, xmask: np.ndarray, zmask: np.ndarray, parity: np.ndarray) -> np.ndarray:
    # X^x Z^z up to a global phase, which drops out of probabilities.
    ar = np.arange(psi.shape[1], dtype=np.int64)
    sign = 1 - 2 * parity[ar[None, :] & zmask[:, None]]
    psi = psi * sign
    return np.take_along_axis(psi, ar[None, :] ^ xmask[:, None], axis=1)


def _trajectory_chunk(circ_batch: CircuitBatch, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    m = circ_batch.n_plus_1
    bsz = circ_batch.size
    parity = _parity_table(m)
    psi = np.zeros((bsz, 2**m), dtype=complex)
    psi[:, 0] = 1.0
    for layer in batch_layers(circ_batch):
        if layer[0] == "phase":
            psi = apply_phase(psi, layer[1], m)
        else:
            psi = apply_matching_layer(psi, layer[1], layer[2])
        if noise.layer_set == "all" or layer[0] == "gate":
            xm, zm = _random_paulis(rng, bsz, m, noise.gamma)
            psi = _apply_pauli_masks(psi, xm, zm, parity)
    return _to_probs(psi, m).sum(axis=0)


def noisy_distribution(
    circ: MqsvtCircuit,
    noise: NoiseSpec,
    trajectories: int,
    seed: int,
    method: str = "trajectories",
) -> OutputDistribution:
    """Output distribution under single-register depolarizing noise.

    ``method="trajectories"`` averages stochastic Pauli insertions; chunk ``c``
    of trajectories uses its own child stream so results depend only on
    ``seed`` and ``trajectories``. ``method="density"`` evolves the exact density
    matrix (``trajectories`` is ignored).
    """
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    if noise.gamma == 0.0:
        return full_distribution(circ)
    if method == "density":
        return OutputDistribution(circ.n, density_probabilities(_as_batch(circ), noise)[0])
    if method != "trajectories":
        raise ValueError(f"unknown method {method!r}")
    m = circ.n_plus_1
    _check_size(m)
    base = _as_batch(circ)
    acc = np.zeros((2, 2 ** (m - 1)))
    done = 0
    chunk = 0
    while done < trajectories:
        size = min(TRAJECTORY_CHUNK, trajectories - done)
        rep = CircuitBatch(m, base.d, base.phases, np.repeat(base.orders, size, 0), np.repeat(base.gates, size, 0))
        acc += _trajectory_chunk(rep, noise, child_rng(seed, STREAM_NOISE, chunk))
        done += size
        chunk += 1
    return OutputDistribution(circ.n, acc / trajectories)


def depolarizing_superoperator(gamma: float) -> np.ndarray:
    """rho -> (1-gamma) rho + gamma Tr(rho) I/2 on a (row bit, column bit) pair."""
    m = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            m[2 * i + j, 2 * i + j] += 1 - gamma
            if i == j:
                for k in range(2):
                    m[2 * i + j, 2 * k + k] += gamma / 2
    return m


def density_probabilities(batch: CircuitBatch, noise: NoiseSpec) -> np.ndarray:
    """Exact noisy joint output probabilities, shape ``(B, 2, 2**n)``."""
    m = batch.n_plus_1
    _check_size(m, MAX_DENSITY_REGISTERS)
    bsz = batch.size
    rho = np.zeros((bsz, 4**m), dtype=complex)
    rho[:, 0] = 1.0
    noise_order = np.tile(np.array([v for r in range(m) for v in (r, m + r)]), (bsz, 1))
    noise_gates = np.broadcast_to(depolarizing_superoperator(noise.gamma).astype(complex), (bsz, m, 4, 4))
    half = 2 ** (m - 1)
    for layer in batch_layers(batch):
        if layer[0] == "phase":
            phi = layer[1]
            ph = np.concatenate([np.full(half, np.exp(1j * phi)), np.full(half, np.exp(-1j * phi))])
            row_ph = np.outer(ph, np.conj(ph)).reshape(-1)
            rho = rho * row_ph[None, :]
        else:
            orders, gates = layer[1], layer[2]
            rho = apply_matching_layer(rho, np.concatenate([orders, orders + m], axis=1), np.concatenate([gates, np.conj(gates)], axis=1))
        if noise.gamma > 0 and (noise.layer_set == "all" or layer[0] == "gate"):
            rho = apply_matching_layer(rho, noise_order, noise_gates)
    diag = rho.reshape(bsz, 2**m, 2**m)[:, np.arange(2**m), np.arange(2**m)].real
    return diag.reshape(bsz, 2, half)


# -- sampling -------------------------------------------------------------------


def sample_outputs(dist: OutputDistribution, k: int, seed: int, postselect_top_zero: bool = True) -> list[str]:
    """Draw ``k`` i.i.d. records.

    With postselection the records are n-bit strings x drawn given top bit 0.
    Without it they are (n+1)-bit strings with the top bit first.
    """
    rng = child_rng(seed, STREAM_SAMPLING)
    n = dist.n
    if postselect_top_zero:
        p = np.clip(dist.probs[0], 0, None)
        if p.sum() <= 0:
            raise ValueError("zero postselection mass")
        draws = rng.choice(2**n, size=k, p=p / p.sum())
        return [_bits(int(v), n) for v in draws]
    p = np.clip(dist.probs.reshape(-1), 0, None)
    draws = rng.choice(2 ** (n + 1), size=k, p=p / p.sum())
    return [_bits(int(v), n + 1) for v in draws]
