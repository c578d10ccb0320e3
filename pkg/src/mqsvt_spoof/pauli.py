"""Pauli strings with a two-bit (x, z) encoding per register.

Strings store bare letters; the 1/sqrt(2) per-register normalization is applied
by the operations that need it (``dense_matrix(normalized=True)``,
``basis_state_overlap``), never by the stored word.

Register 0 is the leftmost letter of the textual form and the most significant
bit of every flat basis index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterator, Sequence

import numpy as np

LETTERS = "IXYZ"
MAX_DENSE_REGISTERS = 12

# (x, z) bits per letter; Y = i X Z.
_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_LETTER = {v: k for k, v in _XZ.items()}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

PHASES = (1, 1j, -1, -1j)


@dataclass(frozen=True, order=True)
class PauliString:
    """An unsigned Pauli word on ``k`` registers.

    Bit ``k - 1 - i`` of ``x``/``z`` belongs to register ``i`` so that the integer
    layout matches flat basis indices.
    """

    k: int
    x: int
    z: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("a Pauli string needs at least one register")
        mask = (1 << self.k) - 1
        if self.x & ~mask or self.z & ~mask:
            raise ValueError("x/z bits outside the register range")

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        text = text.strip().upper()
        if not text or any(c not in _XZ for c in text):
            raise ValueError(f"not a Pauli word: {text!r}")
        x = z = 0
        for c in text:
            bx, bz = _XZ[c]
            x = (x << 1) | bx
            z = (z << 1) | bz
        return cls(len(text), x, z)

    @classmethod
    def identity(cls, k: int) -> "PauliString":
        return cls(k, 0, 0)

    @classmethod
    def from_letters(cls, letters: dict[int, str], k: int) -> "PauliString":
        """Identity everywhere except the given ``{register: letter}`` entries."""
        word = ["I"] * k
        for reg, c in letters.items():
            word[reg] = c
        return cls.from_str("".join(word))

    def letter(self, reg: int) -> str:
        shift = self.k - 1 - reg
        return _LETTER[((self.x >> shift) & 1, (self.z >> shift) & 1)]

    def __str__(self) -> str:
        return "".join(self.letter(i) for i in range(self.k))

    def __repr__(self) -> str:
        return f"PauliString('{self}')"

    def __len__(self) -> int:
        return self.k

    @property
    def weight(self) -> int:
        return bin(self.x | self.z).count("1")

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_diagonal(self) -> bool:
        """True when the word has no X or Y letter."""
        return self.x == 0

    def restrict(self, registers: Sequence[int]) -> "PauliString":
        """The sub-word on ``registers``, in the given order."""
        return PauliString.from_str("".join(self.letter(r) for r in registers))

    @property
    def index(self) -> int:
        """Position in the ``all_paulis(k)`` enumeration (base-4 over 'IXYZ')."""
        out = 0
        for i in range(self.k):
            out = 4 * out + LETTERS.index(self.letter(i))
        return out


def all_paulis(k: int) -> list[PauliString]:
    """All 4**k words, ordered lexicographically over 'IXYZ'."""
    return [PauliString.from_str("".join(w)) for w in _words(k)]


def _words(k: int) -> Iterator[tuple[str, ...]]:
    if k == 0:
        yield ()
        return
    for head in LETTERS:
        for tail in _words(k - 1):
            yield (head,) + tail


def _popcount(v: int) -> int:
    return bin(v).count("1")


def phase_power(p: PauliString, q: PauliString) -> tuple[int, PauliString]:
    """Return ``(e, r)`` with ``p @ q == i**e * r`` for the bare operators."""
    if p.k != q.k:
        raise ValueError(f"length mismatch: {p.k} vs {q.k}")
    r = PauliString(p.k, p.x ^ q.x, p.z ^ q.z)
    # p = i^{|x&z|} X^x Z^z, and Z^a X^b = (-1)^{|a&b|} X^b Z^a.
    e = _popcount(p.x & p.z) + _popcount(q.x & q.z) - _popcount(r.x & r.z)
    e += 2 * _popcount(p.z & q.x)
    return e % 4, r


def multiply(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, r)`` with ``p @ q == phase * r``; phase is one of 1, i, -1, -i."""
    e, r = phase_power(p, q)
    return PHASES[e], r


def dense_matrix(p: PauliString, normalized: bool = False) -> np.ndarray:
    if p.k > MAX_DENSE_REGISTERS:
        raise ValueError(f"refusing to build a dense matrix on {p.k} > {MAX_DENSE_REGISTERS} registers")
    m = reduce(np.kron, (_SINGLE[p.letter(i)] for i in range(p.k)))
    if normalized:
        m = m * 2.0 ** (-p.k / 2)
    return m


def _as_bits(b, k: int) -> tuple[int, ...]:
    if isinstance(b, str):
        bits = tuple(int(c) for c in b)
    else:
        bits = tuple(int(v) for v in b)
    if len(bits) != k or any(v not in (0, 1) for v in bits):
        raise ValueError(f"expected {k} bits, got {b!r}")
    return bits


def basis_state_overlap(p: PauliString, b) -> float:
    """Tr(|b><b| p) for the normalized string ``p``.

    ``b`` is a bit string (``"0100"``) or a sequence of 0/1 with register 0 first.
    """
    bits = _as_bits(b, p.k)
    if p.x:
        return 0.0
    sign = 1
    for i, bit in enumerate(bits):
        if bit and p.letter(i) == "Z":
            sign = -sign
    return sign * 2.0 ** (-p.k / 2)


def two_qubit_labels() -> list[str]:
    return [str(p) for p in all_paulis(2)]
