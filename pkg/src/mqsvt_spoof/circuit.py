"""mQSVT circuits built from layered Haar-random two-qubit unitaries.

A gate acting on the pair ``(a, b)`` is a 4x4 matrix whose first (most
significant) qubit is register ``a``. Register 0 is the ancilla that carries the
Z-rotations ``R(phi) = exp(i phi Z)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .haar import STREAM_CIRCUIT, child_rng, ginibre_to_haar

STREAM_ARCH = 4
STREAM_GATES = 5
DEFAULT_PHASE = math.pi / 4


# -- architecture ---------------------------------------------------------------


@dataclass(frozen=True)
class Architecture:
    """``d_U`` perfect matchings on registers ``0..n``."""

    n_plus_1: int
    layers: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self):
        m = self.n_plus_1
        if m < 2 or m % 2:
            raise ValueError(f"register count must be even and >= 2, got {m}")
        if not self.layers:
            raise ValueError("an architecture needs at least one layer")
        for j, layer in enumerate(self.layers):
            regs = sorted(r for pair in layer for r in pair)
            if regs != list(range(m)) or any(len(p) != 2 for p in layer):
                raise ValueError(f"layer {j} is not a perfect matching on {m} registers: {layer}")

    @property
    def d_U(self) -> int:
        return len(self.layers)

    def partner(self, layer: int, reg: int) -> int:
        for a, b in self.layers[layer]:
            if a == reg:
                return b
            if b == reg:
                return a
        raise ValueError(f"register {reg} not in layer {layer}")

    def order(self, layer: int) -> np.ndarray:
        """Registers of ``layer`` flattened pair by pair, ``[a0, b0, a1, b1, ..]``."""
        return np.array([r for pair in self.layers[layer] for r in pair], dtype=np.int64)

    @classmethod
    def from_orders(cls, orders: np.ndarray) -> "Architecture":
        orders = np.asarray(orders)
        layers = tuple(
            tuple((int(o[2 * k]), int(o[2 * k + 1])) for k in range(len(o) // 2)) for o in orders
        )
        return cls(orders.shape[1], layers)


def is_perfect_matching(layer: Sequence[tuple[int, int]], n_plus_1: int) -> bool:
    regs = sorted(r for pair in layer for r in pair)
    return regs == list(range(n_plus_1)) and all(len(p) == 2 for p in layer)


def _draw_orders(rng: np.random.Generator, n_plus_1: int, d_U: int) -> np.ndarray:
    # Uniform shuffle then adjacent pairing gives a uniform perfect matching.
    return np.stack([rng.permutation(n_plus_1) for _ in range(d_U)])


def random_architecture(n_plus_1: int, d_U: int, seed: int) -> Architecture:
    if n_plus_1 < 2 or n_plus_1 % 2:
        raise ValueError(f"register count must be even and >= 2, got {n_plus_1}")
    if d_U < 1:
        raise ValueError("d_U must be >= 1")
    return Architecture.from_orders(_draw_orders(child_rng(seed, STREAM_ARCH), n_plus_1, d_U))


# -- unitaries ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LayeredUnitary:
    """Architecture plus gates of shape ``(d_U, (n+1)/2, 4, 4)``.

    ``gates[j, i]`` acts on ``architecture.layers[j][i]``.
    """

    architecture: Architecture
    gates: np.ndarray

    def __post_init__(self):
        a = self.architecture
        want = (a.d_U, a.n_plus_1 // 2, 4, 4)
        if self.gates.shape != want:
            raise ValueError(f"gate array has shape {self.gates.shape}, expected {want}")

    @property
    def n_plus_1(self) -> int:
        return self.architecture.n_plus_1

    @property
    def d_U(self) -> int:
        return self.architecture.d_U

    def gate_on(self, layer: int, reg: int) -> tuple[np.ndarray, int]:
        """The layer gate touching ``reg`` and the slot (0 = first qubit) it occupies."""
        for i, (a, b) in enumerate(self.architecture.layers[layer]):
            if reg in (a, b):
                return self.gates[layer, i], (0 if reg == a else 1)
        raise ValueError(f"register {reg} not in layer {layer}")

    def max_unitarity_error(self) -> float:
        g = self.gates
        prod = np.conj(np.swapaxes(g, -1, -2)) @ g
        return float(np.max(np.abs(prod - np.eye(4))))


def sample_layered_unitary(arch: Architecture, seed: int) -> LayeredUnitary:
    rng = child_rng(seed, STREAM_GATES)
    g = rng.standard_normal((arch.d_U, arch.n_plus_1 // 2, 4, 4, 2))
    return LayeredUnitary(arch, ginibre_to_haar(g))


def identity_unitary(arch: Architecture) -> LayeredUnitary:
    gates = np.broadcast_to(np.eye(4, dtype=complex), (arch.d_U, arch.n_plus_1 // 2, 4, 4)).copy()
    return LayeredUnitary(arch, gates)


# -- mQSVT circuit --------------------------------------------------------------


@dataclass(frozen=True)
class PhaseLayer:
    phi: float
    index: int  # 1-based position in the phase list


@dataclass(frozen=True, eq=False)
class GateLayer:
    order: np.ndarray  # flattened pairs
    gates: np.ndarray  # (pairs, 4, 4), already daggered for U^dag layers
    u_layer: int  # 0-based layer of U this came from
    dagger: bool


@dataclass(frozen=True, eq=False)
class MqsvtCircuit:
    u: LayeredUnitary
    d: int
    phases: tuple[float, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("need at least one block")
        if len(self.phases) != 2 * self.d + 1:
            raise ValueError(f"expected {2 * self.d + 1} phases, got {len(self.phases)}")

    @property
    def n_plus_1(self) -> int:
        return self.u.n_plus_1

    @property
    def n(self) -> int:
        return self.u.n_plus_1 - 1

    @property
    def depth(self) -> int:
        return self.d * (2 * self.u.d_U + 2) + 1

    def sequence(self) -> list[str]:
        """Coarse gate sequence, e.g. ``['R(phi1)', 'U', 'R(phi2)', 'U^dag', 'R(phi3)']``."""
        out = ["R(phi1)"]
        for k in range(2 * self.d):
            out.append("U" if k % 2 == 0 else "U^dag")
            out.append(f"R(phi{k + 2})")
        return out

    def layers(self) -> list[PhaseLayer | GateLayer]:
        """Every layer in time order; ``len(layers()) == depth``."""
        arch = self.u.architecture
        out: list[PhaseLayer | GateLayer] = [PhaseLayer(self.phases[0], 1)]
        for k in range(2 * self.d):
            if k % 2 == 0:
                for j in range(arch.d_U):
                    out.append(GateLayer(arch.order(j), self.u.gates[j], j, False))
            else:
                for j in reversed(range(arch.d_U)):
                    g = np.conj(np.swapaxes(self.u.gates[j], -1, -2))
                    out.append(GateLayer(arch.order(j), g, j, True))
            out.append(PhaseLayer(self.phases[k + 1], k + 2))
        return out

    # -- serialization --

    def to_dict(self) -> dict:
        arch = self.u.architecture
        g = self.u.gates
        return {
            "n_plus_1": arch.n_plus_1,
            "d_U": arch.d_U,
            "d": self.d,
            "phases": [float(p) for p in self.phases],
            "architecture": [[list(p) for p in layer] for layer in arch.layers],
            "gates": [
                [[[[float(z.real), float(z.imag)] for z in row] for row in gate] for gate in layer]
                for layer in g
            ],
            "provenance": dict(self.provenance),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "MqsvtCircuit":
        layers = tuple(tuple((int(a), int(b)) for a, b in layer) for layer in doc["architecture"])
        arch = Architecture(int(doc["n_plus_1"]), layers)
        raw = np.array(doc["gates"], dtype=float)
        gates = raw[..., 0] + 1j * raw[..., 1]
        return cls(LayeredUnitary(arch, gates), int(doc["d"]), tuple(doc["phases"]), dict(doc.get("provenance", {})))

    @classmethod
    def from_json(cls, text: str) -> "MqsvtCircuit":
        return cls.from_dict(json.loads(text))


def default_phases(d: int) -> tuple[float, ...]:
    return (DEFAULT_PHASE,) * (2 * d + 1)


def build_mqsvt(u: LayeredUnitary, d: int, phases: Sequence[float] | None = None, provenance: dict | None = None) -> MqsvtCircuit:
    ph = default_phases(d) if phases is None else tuple(float(p) for p in phases)
    if len(ph) != 2 * d + 1:
        raise ValueError(f"expected {2 * d + 1} phases, got {len(ph)}")
    return MqsvtCircuit(u, d, ph, provenance or {})


@dataclass(frozen=True)
class NoiseSpec:
    """Single-register depolarizing noise of strength ``gamma`` after layers.

    ``layer_set`` is ``"all"`` (every layer, including phase layers) or
    ``"unitary"`` (only the layers of U and U^dag).
    """

    gamma: float
    layer_set: str = "all"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.layer_set not in ("all", "unitary"):
            raise ValueError(f"unknown layer_set {self.layer_set!r}")

    def applies_to(self, layer) -> bool:
        return self.layer_set == "all" or isinstance(layer, GateLayer)


# -- ensembles ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CircuitBatch:
    """Many circuits with equal shape, stored as stacked arrays.

    ``orders`` has shape ``(B, d_U, n+1)``, ``gates`` ``(B, d_U, (n+1)/2, 4, 4)``.
    """

    n_plus_1: int
    d: int
    phases: tuple[float, ...]
    orders: np.ndarray
    gates: np.ndarray

    @property
    def size(self) -> int:
        return self.orders.shape[0]

    @property
    def d_U(self) -> int:
        return self.orders.shape[1]

    def member(self, i: int) -> MqsvtCircuit:
        arch = Architecture.from_orders(self.orders[i])
        return MqsvtCircuit(LayeredUnitary(arch, self.gates[i]), self.d, self.phases)

    @classmethod
    def from_circuits(cls, circs: Sequence[MqsvtCircuit]) -> "CircuitBatch":
        c0 = circs[0]
        orders = np.stack([np.stack([c.u.architecture.order(j) for j in range(c.u.d_U)]) for c in circs])
        gates = np.stack([c.u.gates for c in circs])
        return cls(c0.n_plus_1, c0.d, c0.phases, orders, gates)


def ensemble_member(n_plus_1: int, d_U: int, d: int, master_seed: int, index: int, phases=None) -> MqsvtCircuit:
    """Circuit ``index`` of the ensemble keyed by ``master_seed``."""
    return sample_ensemble(n_plus_1, d_U, d, master_seed, index, 1, phases).member(0)


def sample_ensemble(n_plus_1: int, d_U: int, d: int, master_seed: int, start: int, count: int, phases=None) -> CircuitBatch:
    """Circuits ``start .. start+count-1`` of the ensemble keyed by ``master_seed``.

    Each circuit draws its matchings and gates from its own child stream, so a
    circuit is the same whatever batch it is generated in.
    """
    if n_plus_1 < 2 or n_plus_1 % 2:
        raise ValueError(f"register count must be even and >= 2, got {n_plus_1}")
    ph = default_phases(d) if phases is None else tuple(float(p) for p in phases)
    orders = np.empty((count, d_U, n_plus_1), dtype=np.int64)
    normals = np.empty((count, d_U, n_plus_1 // 2, 4, 4, 2))
    for i in range(count):
        rng = child_rng(master_seed, STREAM_CIRCUIT, start + i)
        orders[i] = _draw_orders(rng, n_plus_1, d_U)
        normals[i] = rng.standard_normal((d_U, n_plus_1 // 2, 4, 4, 2))
    return CircuitBatch(n_plus_1, d, ph, orders, ginibre_to_haar(normals))
