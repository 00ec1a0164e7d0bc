"""Binary-symplectic representation of the n-qubit Pauli group.

A Hermitian Pauli operator on n qubits is encoded by a pair of n-bit masks
(x, z), bit k giving the X / Z exponent on qubit k.  The operator attached to
an index a = (x, z) is

    T_a = (i^{x_1 z_1} X^{x_1} Z^{z_1}) ox ... ox (i^{x_n z_n} X^{x_n} Z^{z_n})

so each tensor factor is one of 1, X, Y, Z and T_a is Hermitian with
T_a^2 = 1.  A general group element is written i^t T_a with t mod 4; rows of
stabilizer tableaus always carry t in {0, 2}.

Commutation is governed by the symplectic form
``omega(a, b) = a.x . b.z + b.x . a.z (mod 2)`` and products of commuting
operators satisfy ``T_a T_b = (-1)^{beta(a, b)} T_{a+b}``, where the sign bit
``beta`` is computed by mod-4 exponent bookkeeping (see :func:`phase_exponent`).

Qubit 0 is the first (leftmost) tensor factor, i.e. the most significant
block of a computational-basis index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

GATE_KINDS_1Q = ("H", "S", "X", "Y", "Z")
GATE_KINDS_2Q = ("CZ", "CNOT")
GATE_KINDS = GATE_KINDS_1Q + GATE_KINDS_2Q

MAX_DENSE_QUBITS = 6

_PAULI_1Q = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
}

_LETTER_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LETTER = {v: k for k, v in _LETTER_TO_BITS.items()}


class PauliError(ValueError):
    """Invalid Pauli datum: malformed string, size mismatch, bad precondition."""


@dataclass(frozen=True)
class PauliIndex:
    """A point of Z2^{2n}: the index of a Hermitian Pauli operator T_a."""

    n: int
    x: int
    z: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise PauliError(f"qubit count must be nonnegative, got {self.n}")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise PauliError("x/z bits exceed the qubit count")

    def __add__(self, other: "PauliIndex") -> "PauliIndex":
        _check_same_n(self, other)
        return PauliIndex(self.n, self.x ^ other.x, self.z ^ other.z)

    @property
    def is_zero(self) -> bool:
        return self.x == 0 and self.z == 0

    def bit(self, qubit: int) -> tuple[int, int]:
        """X and Z exponents on one qubit."""
        return (self.x >> qubit) & 1, (self.z >> qubit) & 1

    def code(self) -> int:
        """Integer code (x << n) | z used to index coefficient vectors."""
        return (self.x << self.n) | self.z

    @staticmethod
    def from_code(n: int, code: int) -> "PauliIndex":
        mask = (1 << n) - 1
        return PauliIndex(n, (code >> n) & mask, code & mask)

    @staticmethod
    def zero(n: int) -> "PauliIndex":
        return PauliIndex(n, 0, 0)

    @staticmethod
    def single(n: int, qubit: int, letter: str) -> "PauliIndex":
        """Single-qubit X/Y/Z (or I) embedded at position ``qubit``."""
        if not 0 <= qubit < n:
            raise PauliError(f"qubit {qubit} out of range for n={n}")
        xb, zb = _LETTER_TO_BITS[letter]
        return PauliIndex(n, xb << qubit, zb << qubit)

    def to_string(self) -> str:
        return "".join(_BITS_TO_LETTER[self.bit(k)] for k in range(self.n))


@dataclass(frozen=True)
class PhasedPauli:
    """A group element i^phase T_index with phase carried mod 4.

    Hermitian elements have even phase; ``phase == 2`` is the sign -1.
    """

    phase: int
    index: PauliIndex

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", self.phase % 4)

    @property
    def n(self) -> int:
        return self.index.n

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign_bit(self) -> int:
        """Phase as a sign bit; only meaningful for Hermitian elements."""
        if not self.is_hermitian:
            raise PauliError("sign bit undefined for non-Hermitian phase")
        return self.phase // 2

    @staticmethod
    def identity(n: int) -> "PhasedPauli":
        return PhasedPauli(0, PauliIndex.zero(n))

    @staticmethod
    def from_string(text: str) -> "PhasedPauli":
        """Parse ``[+-]?[IXYZ]+`` into a Hermitian phased Pauli."""
        s = text.strip()
        phase = 0
        if s and s[0] in "+-":
            phase = 2 if s[0] == "-" else 0
            s = s[1:]
        if not s or any(ch not in _LETTER_TO_BITS for ch in s):
            raise PauliError(f"invalid Pauli string {text!r}")
        x = z = 0
        for k, ch in enumerate(s):
            xb, zb = _LETTER_TO_BITS[ch]
            x |= xb << k
            z |= zb << k
        return PhasedPauli(phase, PauliIndex(len(s), x, z))

    def to_string(self) -> str:
        if not self.is_hermitian:
            raise PauliError("only Hermitian Paulis have a string form")
        return ("-" if self.phase else "+") + self.index.to_string()


@dataclass(frozen=True)
class ValueAssignment:
    """A Z2-valued function on a set of Pauli indices.

    On commuting pairs it must satisfy
    ``gamma(a+b) = gamma(a) + gamma(b) + beta(a, b)`` and ``gamma(0) = 0``;
    the solver and validator live in :mod:`polysim.cnc`.
    """

    domain: tuple[PauliIndex, ...]
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.domain) != len(self.values):
            raise PauliError("value assignment domain/values length mismatch")
        if any(v not in (0, 1) for v in self.values):
            raise PauliError("value assignment values must be bits")

    def as_dict(self) -> dict[PauliIndex, int]:
        return dict(zip(self.domain, self.values))

    def __call__(self, a: PauliIndex) -> int:
        try:
            return self.values[self.domain.index(a)]
        except ValueError:
            raise PauliError(f"{a} outside the assignment domain") from None


@dataclass(frozen=True)
class CliffordGate:
    """An elementary Clifford gate acting on one or two qubit positions."""

    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise PauliError(f"unknown gate kind {self.kind!r}")
        want = 1 if self.kind in GATE_KINDS_1Q else 2
        if len(self.qubits) != want:
            raise PauliError(f"{self.kind} takes {want} qubit(s)")
        if want == 2 and self.qubits[0] == self.qubits[1]:
            raise PauliError(f"{self.kind} requires two distinct qubits")
        if any(q < 0 for q in self.qubits):
            raise PauliError("negative qubit position")

    def check_range(self, n: int) -> None:
        if any(q >= n for q in self.qubits):
            raise PauliError(f"gate {self.kind}{self.qubits} out of range for n={n}")


def _check_same_n(a: PauliIndex, b: PauliIndex) -> None:
    if a.n != b.n:
        raise PauliError(f"qubit-count mismatch: {a.n} vs {b.n}")


def omega(a: PauliIndex, b: PauliIndex) -> int:
    """Symplectic form; 0 iff T_a and T_b commute."""
    _check_same_n(a, b)
    return ((a.x & b.z).bit_count() + (b.x & a.z).bit_count()) % 2


def phase_exponent(a: PauliIndex, b: PauliIndex) -> int:
    """Mod-4 exponent t with T_a T_b = i^t T_{a+b}.

    Per-qubit, X^{x1}Z^{z1} X^{x2}Z^{z2} = (-1)^{z1 x2} X^{x1+x2} Z^{z1+z2};
    collecting the Hermitian normalisation factors i^{x.z} of T_a, T_b and
    T_{a+b} gives t = x_a.z_a + x_b.z_b + 2 z_a.x_b - x_c.z_c (mod 4) with all
    dot products over the integers.
    """
    _check_same_n(a, b)
    cx, cz = a.x ^ b.x, a.z ^ b.z
    t = (
        (a.x & a.z).bit_count()
        + (b.x & b.z).bit_count()
        + 2 * (a.z & b.x).bit_count()
        - (cx & cz).bit_count()
    )
    return t % 4


def beta(a: PauliIndex, b: PauliIndex) -> int:
    """Sign bit with T_a T_b = (-1)^{beta(a,b)} T_{a+b} for commuting a, b."""
    if omega(a, b) != 0:
        raise PauliError("beta is defined only for commuting Pauli indices")
    return phase_exponent(a, b) // 2


def multiply(p: PhasedPauli, q: PhasedPauli) -> PhasedPauli:
    """Group product (i^{p.phase} T_{p.index}) (i^{q.phase} T_{q.index})."""
    t = (p.phase + q.phase + phase_exponent(p.index, q.index)) % 4
    return PhasedPauli(t, p.index + q.index)


def conjugate(g: CliffordGate, p: PhasedPauli) -> PhasedPauli:
    """Image U p U^dagger of a phased Pauli under an elementary Clifford gate.

    Per-gate symplectic action with sign tracking; each rule is verified
    against dense conjugation in the test suite.
    """
    g.check_range(p.n)
    x, z, t = p.index.x, p.index.z, p.phase
    if g.kind in GATE_KINDS_1Q:
        q = g.qubits[0]
        xq, zq = (x >> q) & 1, (z >> q) & 1
        if g.kind == "H":
            t += 2 * (xq & zq)
            x ^= (xq ^ zq) << q
            z ^= (xq ^ zq) << q
        elif g.kind == "S":
            t += 2 * (xq & zq)
            z ^= xq << q
        elif g.kind == "X":
            t += 2 * zq
        elif g.kind == "Y":
            t += 2 * (xq ^ zq)
        elif g.kind == "Z":
            t += 2 * xq
    elif g.kind == "CNOT":
        c, tq = g.qubits
        xc, zc = (x >> c) & 1, (z >> c) & 1
        xt, zt = (x >> tq) & 1, (z >> tq) & 1
        t += 2 * (xc & zt & (xt ^ zc ^ 1))
        x ^= xc << tq
        z ^= zt << c
    else:  # CZ
        c, tq = g.qubits
        xc, zc = (x >> c) & 1, (z >> c) & 1
        xt, zt = (x >> tq) & 1, (z >> tq) & 1
        t += 2 * (xc & xt & (zc ^ zt))
        z ^= xc << tq
        z ^= xt << c
    return PhasedPauli(t % 4, PauliIndex(p.n, x, z))


def materialize(p: PhasedPauli) -> np.ndarray:
    """Dense 2^n x 2^n complex matrix of i^t T_a (n <= 6)."""
    if p.n > MAX_DENSE_QUBITS:
        raise PauliError(f"dense materialization limited to n<={MAX_DENSE_QUBITS}")
    m = np.eye(1, dtype=complex)
    for k in range(p.n):
        m = np.kron(m, _PAULI_1Q[p.index.bit(k)])
    return (1j**p.phase) * m


def all_indices(n: int) -> Iterable[PauliIndex]:
    """All 4^n points of Z2^{2n} in code order."""
    for code in range(4**n):
        yield PauliIndex.from_code(n, code)
