"""Closed non-contextual (CNC) sets and operators.

A subset Omega of Z2^{2n} is closed if commuting pairs have their sum in
Omega, and non-contextual if it admits a value assignment, i.e. a solution
gamma of the GF(2) system gamma(a) + gamma(b) + gamma(a+b) = beta(a, b) over
commuting pairs with gamma(0) = 0.  A pair (Omega, gamma) labels the
trace-one Hermitian operator

    A = (1/2^n) sum_{a in Omega} (-1)^{gamma(a)} T_a,

which generalizes a stabilizer projector (the case where Omega is a maximal
isotropic subspace).  Maximal CNC sets are enumerated exhaustively at
n <= 2; the n = 2 label count is kept as a regression constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import (
    PauliError,
    PauliIndex,
    PhasedPauli,
    ValueAssignment,
    beta,
    materialize,
    omega,
)

MAX_ENUM_QUBITS = 2
MAX_OPERATOR_QUBITS = 4
_MAX_FREE_VARS = 24


class CncError(ValueError):
    """Invalid CNC datum: missing zero, broken closure, or inconsistent gamma."""


@dataclass(frozen=True)
class CncLabel:
    """A phase-space point: a CNC set with one of its value assignments."""

    n: int
    omega_set: tuple[PauliIndex, ...]
    gamma: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.omega_set or not self.omega_set[0].is_zero:
            raise CncError("omega must be sorted with the zero index first")
        if len(self.gamma) != len(self.omega_set):
            raise CncError("gamma length must match omega")

    @staticmethod
    def make(n: int, points, assignment: ValueAssignment) -> "CncLabel":
        table = assignment.as_dict()
        pts = sorted(points, key=lambda p: p.code())
        return CncLabel(n, tuple(pts), tuple(table[p] for p in pts))

    def gamma_of(self, a: PauliIndex) -> int:
        try:
            return self.gamma[self.omega_set.index(a)]
        except ValueError:
            raise CncError(f"{a} is not in omega") from None

    def validate(self) -> None:
        ok, witness = is_closed(self.omega_set)
        if not ok:
            raise CncError(f"omega not closed, witness {witness}")
        table = dict(zip(self.omega_set, self.gamma))
        if table[PauliIndex.zero(self.n)] != 0:
            raise CncError("gamma(0) must vanish")
        for i, a in enumerate(self.omega_set):
            for b in self.omega_set[i + 1 :]:
                if omega(a, b) == 0:
                    if (table[a] + table[b] + beta(a, b)) % 2 != table[a + b]:
                        raise CncError(f"gamma law violated on ({a}, {b})")

    def to_json(self) -> dict:
        return {
            "omega": [p.to_string() for p in self.omega_set],
            "gamma": list(self.gamma),
        }

    @staticmethod
    def from_json(data: dict) -> "CncLabel":
        try:
            points = [PhasedPauli.from_string(s).index for s in data["omega"]]
            gamma = [int(v) for v in data["gamma"]]
        except (KeyError, TypeError, PauliError) as exc:
            raise CncError(f"malformed CNC label JSON: {exc}") from exc
        if not points:
            raise CncError("empty omega")
        if len(gamma) != len(points):
            raise CncError("gamma length must match omega")
        order = sorted(range(len(points)), key=lambda i: points[i].code())
        label = CncLabel(
            points[0].n,
            tuple(points[i] for i in order),
            tuple(gamma[i] for i in order),
        )
        label.validate()
        return label


def is_closed(points) -> tuple[bool, tuple[PauliIndex, PauliIndex] | None]:
    """Closure check; on failure also returns a violating commuting pair."""
    pts = list(points)
    if not any(p.is_zero for p in pts):
        raise CncError("a CNC set must contain the zero index")
    have = {p.code() for p in pts}
    for i, a in enumerate(pts):
        for b in pts[i + 1 :]:
            if omega(a, b) == 0 and (a + b).code() not in have:
                return False, (a, b)
    return True, None


def _solve_gamma(points: list[PauliIndex]):
    """Row-reduce the value-assignment system over the nonzero points.

    Returns (variables, pivot rows, free columns) or None when inconsistent.
    Rows are (mask, rhs) bit masks over variable positions.
    """
    variables = sorted((p for p in points if not p.is_zero), key=lambda p: p.code())
    pos = {p.code(): i for i, p in enumerate(variables)}
    rows: list[tuple[int, int]] = []
    for i, a in enumerate(variables):
        for b in variables[i + 1 :]:
            if omega(a, b) != 0:
                continue
            c = a + b
            mask = (1 << pos[a.code()]) ^ (1 << pos[b.code()]) ^ (1 << pos[c.code()])
            rows.append((mask, beta(a, b)))
    pivots: list[tuple[int, int, int]] = []  # (pivot bit, mask, rhs)
    for mask, rhs in rows:
        for bit, pmask, prhs in pivots:
            if (mask >> bit) & 1:
                mask ^= pmask
                rhs ^= prhs
        if mask == 0:
            if rhs:
                return None
            continue
        pivots.append((mask.bit_length() - 1, mask, rhs))
    pivot_bits = {bit for bit, _, _ in pivots}
    free = [i for i in range(len(variables)) if i not in pivot_bits]
    return variables, pivots, free


def value_assignments(points) -> list[ValueAssignment]:
    """All value assignments on a closed set; empty iff the set is contextual.

    The solution count is always a power of two (affine GF(2) system).
    """
    pts = list(points)
    ok, witness = is_closed(pts)
    if not ok:
        raise CncError(f"value assignments need a closed set, witness {witness}")
    solved = _solve_gamma(pts)
    if solved is None:
        return []
    variables, pivots, free = solved
    if len(free) > _MAX_FREE_VARS:
        raise CncError(f"too many free variables ({len(free)}) to enumerate")
    domain = (PauliIndex.zero(pts[0].n), *variables)
    out = []
    for choice in range(1 << len(free)):
        solution = 0
        for k, bit in enumerate(free):
            if (choice >> k) & 1:
                solution |= 1 << bit
        for bit, mask, rhs in sorted(pivots):
            acc = rhs ^ ((solution & mask & ~(1 << bit)).bit_count() & 1)
            if acc:
                solution |= 1 << bit
        values = (0, *(((solution >> i) & 1) for i in range(len(variables))))
        out.append(ValueAssignment(domain, values))
    return out


def enumerate_maximal_cnc(n: int) -> list[CncLabel]:
    """All (Omega, gamma) with Omega maximal among CNC sets, each once.

    Exhaustive scan over subsets of Z2^{2n} containing zero: closure is
    checked for every subset with vectorized mask arithmetic, candidates are
    kept when the gamma system is solvable, and non-maximal sets are
    rejected by pairwise inclusion.  Feasible for n <= 2.
    """
    if n > MAX_ENUM_QUBITS:
        raise CncError(f"maximal CNC enumeration limited to n<={MAX_ENUM_QUBITS}")
    points = [PauliIndex.from_code(n, c) for c in range(4**n)]
    npts = 4**n
    masks = (np.arange(1 << (npts - 1), dtype=np.uint32) << 1) | 1
    closed = np.ones(masks.size, dtype=bool)
    for i in range(1, npts):
        for j in range(i + 1, npts):
            if omega(points[i], points[j]) != 0:
                continue
            k = i ^ j  # code arithmetic matches index addition
            bad = (
                (masks & (1 << i)).astype(bool)
                & (masks & (1 << j)).astype(bool)
                & ~(masks & (1 << k)).astype(bool)
            )
            closed &= ~bad
    cnc_masks = []
    for mask in masks[closed]:
        members = [points[i] for i in range(npts) if (int(mask) >> i) & 1]
        if _solve_gamma(members) is not None:
            cnc_masks.append(int(mask))
    maximal = [
        m
        for m in cnc_masks
        if not any(other != m and other & m == m for other in cnc_masks)
    ]
    labels = []
    for mask in sorted(maximal):
        members = [points[i] for i in range(npts) if (mask >> i) & 1]
        for assignment in value_assignments(members):
            labels.append(CncLabel.make(n, members, assignment))
    return labels


def cnc_coeffs(label: CncLabel) -> np.ndarray:
    """Pauli coefficient vector of the labelled operator, in code order."""
    coeffs = np.zeros(4**label.n)
    scale = 1.0 / (1 << label.n)
    for a, g in zip(label.omega_set, label.gamma):
        coeffs[a.code()] = scale * (-1.0) ** g
    return coeffs


def cnc_operator(label: CncLabel) -> np.ndarray:
    """Dense Hermitian trace-one operator of a CNC label (n <= 4)."""
    if label.n > MAX_OPERATOR_QUBITS:
        raise CncError(f"dense CNC operator limited to n<={MAX_OPERATOR_QUBITS}")
    dim = 1 << label.n
    acc = np.zeros((dim, dim), dtype=complex)
    for a, g in zip(label.omega_set, label.gamma):
        acc += (-1.0) ** g * materialize(PhasedPauli(0, a))
    return acc / dim
