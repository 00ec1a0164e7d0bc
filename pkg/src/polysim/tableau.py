"""Stabilizer tableau simulator with destabilizer tracking.

The state is a rank-one projector (1/2^n) sum_{a in I} (-1)^{gamma(a)} T_a for
a maximal isotropic subspace I and value assignment gamma.  It is stored as
2n rows: n destabilizers followed by n stabilizer generators, each row a
Hermitian signed Pauli.  Destabilizer row i anticommutes with stabilizer row
i and commutes with every other row; destabilizer phases are bookkeeping
only and never influence outcomes.

Rows are bit packed into 64-bit words, laid out word-major: ``xs[w]`` holds
word w of the X mask for all 2n rows, so gate conjugation is a handful of
vectorized operations on contiguous arrays and costs O(1) numpy calls per
gate.  Phases are tracked through the mod-4 exponent arithmetic of
:mod:`polysim.pauli`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import (
    CliffordGate,
    PauliIndex,
    PhasedPauli,
    materialize,
    multiply,
    omega,
)

_WORD = 64
_ONE = np.uint64(1)


class TableauError(ValueError):
    """Invalid tableau operation: bad measurement input or broken invariant."""


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result of one Pauli measurement: outcome bit, branch type, probability."""

    outcome: int
    deterministic: bool
    probability: float

    def __post_init__(self) -> None:
        want = 1.0 if self.deterministic else 0.5
        if self.probability != want:
            raise TableauError("outcome probability inconsistent with branch type")


def _pack(index: PauliIndex, words: int) -> tuple[np.ndarray, np.ndarray]:
    bx = np.zeros(words, dtype=np.uint64)
    bz = np.zeros(words, dtype=np.uint64)
    mask = (1 << _WORD) - 1
    for w in range(words):
        bx[w] = (index.x >> (_WORD * w)) & mask
        bz[w] = (index.z >> (_WORD * w)) & mask
    return bx, bz


def _unpack(words_col: np.ndarray) -> int:
    value = 0
    for w, word in enumerate(words_col):
        value |= int(word) << (_WORD * w)
    return value


def _popc(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a)


class StabilizerTableau:
    """Mutable destabilizer/stabilizer tableau for one owner at a time."""

    __slots__ = ("n", "words", "xs", "zs", "r", "rng", "_b1", "_b2", "_b3")

    def __init__(self, n: int, seed: int | None = None):
        if n < 1:
            raise TableauError("tableau needs at least one qubit")
        self.n = n
        self.words = (n + _WORD - 1) // _WORD
        self.xs = np.zeros((self.words, 2 * n), dtype=np.uint64)
        self.zs = np.zeros((self.words, 2 * n), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.uint64)
        self.rng = np.random.default_rng(seed)
        self._b1 = np.empty(2 * n, dtype=np.uint64)
        self._b2 = np.empty(2 * n, dtype=np.uint64)
        self._b3 = np.empty(2 * n, dtype=np.uint64)

    # -- construction ------------------------------------------------------

    @classmethod
    def init_zero(cls, n: int, seed: int | None = None) -> "StabilizerTableau":
        """Tableau of |0...0>: stabilizers Z_i, destabilizers X_i."""
        t = cls(n, seed)
        for i in range(n):
            w, b = divmod(i, _WORD)
            t.xs[w, i] |= np.uint64(1 << b)
            t.zs[w, n + i] |= np.uint64(1 << b)
        return t

    @classmethod
    def from_stabilizers(
        cls, rows: list[PhasedPauli], seed: int | None = None
    ) -> "StabilizerTableau":
        """Build a tableau from n independent commuting signed Pauli generators."""
        n = rows[0].n
        if len(rows) != n:
            raise TableauError(f"need exactly {n} generators, got {len(rows)}")
        for i, p in enumerate(rows):
            if not p.is_hermitian:
                raise TableauError("stabilizer generators must carry sign +-1")
            for q in rows[:i]:
                if omega(p.index, q.index) != 0:
                    raise TableauError("stabilizer generators must commute")
        codes = [p.index.code() for p in rows]
        destab_codes = _symplectic_complement(codes, n)
        t = cls(n, seed)
        for i, code in enumerate(destab_codes):
            idx = PauliIndex.from_code(n, code)
            t.xs[:, i], t.zs[:, i] = _pack(idx, t.words)
        for i, p in enumerate(rows):
            t.xs[:, n + i], t.zs[:, n + i] = _pack(p.index, t.words)
            t.r[n + i] = p.sign_bit
        t.validate()
        return t

    def copy(self) -> "StabilizerTableau":
        t = StabilizerTableau.__new__(StabilizerTableau)
        t.n, t.words, t.rng = self.n, self.words, self.rng
        t.xs, t.zs, t.r = self.xs.copy(), self.zs.copy(), self.r.copy()
        t._b1 = np.empty_like(self._b1)
        t._b2 = np.empty_like(self._b2)
        t._b3 = np.empty_like(self._b3)
        return t

    # -- row access --------------------------------------------------------

    def _row(self, i: int) -> PhasedPauli:
        idx = PauliIndex(self.n, _unpack(self.xs[:, i]), _unpack(self.zs[:, i]))
        return PhasedPauli(2 * int(self.r[i]), idx)

    def destab_row(self, i: int) -> PhasedPauli:
        return self._row(i)

    def stab_row(self, i: int) -> PhasedPauli:
        return self._row(self.n + i)

    def dump(self) -> str:
        """One row per line: D/S tag, sign character, Pauli string."""
        lines = ["D " + self.destab_row(i).to_string() for i in range(self.n)]
        lines += ["S " + self.stab_row(i).to_string() for i in range(self.n)]
        return "\n".join(lines)

    # -- gates -------------------------------------------------------------

    def apply_gate(self, gate: CliffordGate) -> None:
        """Conjugate every row by an elementary Clifford gate, in place."""
        gate.check_range(self.n)
        kind = gate.kind
        b1, b2, b3 = self._b1, self._b2, self._b3
        if kind in ("H", "S", "X", "Y", "Z"):
            w, b = divmod(gate.qubits[0], _WORD)
            m = np.uint64(1 << b)
            sh = np.uint64(b)
            x, z = self.xs[w], self.zs[w]
            if kind == "H":
                np.bitwise_and(x, m, out=b1)
                np.bitwise_and(z, m, out=b2)
                np.bitwise_and(b1, b2, out=b3)
                np.right_shift(b3, sh, out=b3)
                self.r ^= b3
                np.bitwise_xor(b1, b2, out=b1)
                x ^= b1
                z ^= b1
            elif kind == "S":
                np.bitwise_and(x, m, out=b1)
                np.bitwise_and(z, b1, out=b2)
                np.right_shift(b2, sh, out=b2)
                self.r ^= b2
                z ^= b1
            elif kind == "X":
                np.bitwise_and(z, m, out=b1)
                np.right_shift(b1, sh, out=b1)
                self.r ^= b1
            elif kind == "Y":
                np.bitwise_xor(x, z, out=b1)
                np.bitwise_and(b1, m, out=b1)
                np.right_shift(b1, sh, out=b1)
                self.r ^= b1
            else:  # Z
                np.bitwise_and(x, m, out=b1)
                np.right_shift(b1, sh, out=b1)
                self.r ^= b1
            return
        c, t = gate.qubits
        wc, bc = divmod(c, _WORD)
        wt, bt = divmod(t, _WORD)
        shc, sht = np.uint64(bc), np.uint64(bt)
        xc = (self.xs[wc] >> shc) & _ONE
        zc = (self.zs[wc] >> shc) & _ONE
        xt = (self.xs[wt] >> sht) & _ONE
        zt = (self.zs[wt] >> sht) & _ONE
        if kind == "CNOT":
            self.r ^= xc & zt & (xt ^ zc ^ _ONE)
            self.xs[wt] ^= xc << sht
            self.zs[wc] ^= zt << shc
        else:  # CZ
            self.r ^= xc & xt & (zc ^ zt)
            self.zs[wt] ^= xc << sht
            self.zs[wc] ^= xt << shc

    # -- measurement -------------------------------------------------------

    def measure(
        self,
        b: PauliIndex,
        sign: int = 0,
        forced: int | None = None,
        rng: np.random.Generator | None = None,
    ) -> MeasurementOutcome:
        """Measure the signed Pauli observable (-1)^sign T_b, updating in place.

        If the observable lies (up to sign) in the stabilizer group the
        outcome is determined and the state is unchanged.  Otherwise the
        outcome is a fair coin: the first anticommuting stabilizer generator
        is replaced by the measured operator, the remaining anticommuting
        rows absorb that pivot row, and the pivot's old value becomes the
        paired destabilizer.  ``forced`` selects the branch deterministically
        and must have nonzero probability.
        """
        if b.n != self.n:
            raise TableauError(f"operator acts on {b.n} qubits, tableau has {self.n}")
        if b.is_zero:
            raise TableauError("cannot measure the identity index")
        if forced is not None and forced not in (0, 1):
            raise TableauError("forced outcome must be a bit")
        bx, bz = _pack(b, self.words)
        anti = (
            (_popc(self.xs & bz[:, None]).sum(axis=0) + _popc(self.zs & bx[:, None]).sum(axis=0))
            % 2
        ).astype(bool)
        if anti[self.n :].any():
            outcome = forced if forced is not None else int(self.rng_bit(rng))
            self._measure_random(bx, bz, anti, outcome ^ (sign & 1))
            return MeasurementOutcome(outcome, False, 0.5)
        value = self._deterministic_value(bx, bz, anti) ^ (sign & 1)
        if forced is not None and forced != value:
            raise TableauError(
                f"forced outcome {forced} has probability 0 (deterministic {value})"
            )
        return MeasurementOutcome(value, True, 1.0)

    def rng_bit(self, rng: np.random.Generator | None = None) -> int:
        return int((rng or self.rng).integers(0, 2))

    def _measure_random(self, bx, bz, anti, phase_bit) -> None:
        n = self.n
        p = n + int(np.argmax(anti[n:]))
        xp, zp = self.xs[:, p].copy(), self.zs[:, p].copy()
        rows = np.flatnonzero(anti)
        rows = rows[rows != p]
        # phases are tracked for the stabilizer block, where the summed rows
        # are guaranteed to commute; destabilizer phases are don't-cares
        drows, srows = rows[rows < n], rows[rows >= n]
        if srows.size:
            xi, zi = self.xs[:, srows], self.zs[:, srows]
            cx, cz = xi ^ xp[:, None], zi ^ zp[:, None]
            delta = (
                _popc(xi & zi).sum(axis=0).astype(np.int64)
                + int(_popc(xp & zp).sum())
                + 2 * _popc(zi & xp[:, None]).sum(axis=0).astype(np.int64)
                - _popc(cx & cz).sum(axis=0).astype(np.int64)
            )
            t = (2 * self.r[srows].astype(np.int64) + 2 * int(self.r[p]) + delta) % 4
            self.r[srows] = (t >> 1).astype(np.uint64)
            self.xs[:, srows], self.zs[:, srows] = cx, cz
        if drows.size:
            self.xs[:, drows] ^= xp[:, None]
            self.zs[:, drows] ^= zp[:, None]
        # pivot's old stabilizer becomes its destabilizer partner
        self.xs[:, p - n], self.zs[:, p - n] = xp, zp
        self.r[p - n] = self.r[p]
        self.xs[:, p], self.zs[:, p] = bx, bz
        self.r[p] = phase_bit

    def _deterministic_value(self, bx, bz, anti) -> int:
        """Sign of T_b in the stabilizer group via the destabilizer pairing.

        The stabilizer rows whose destabilizer partners anticommute with b
        multiply to (-1)^{gamma(b)} T_b; the accumulated mod-4 exponent of
        the ordered product gives gamma(b).
        """
        n = self.n
        sel = np.flatnonzero(anti[:n])
        if sel.size == 0:
            raise TableauError("measured index expands to the identity")
        xj, zj = self.xs[:, n + sel], self.zs[:, n + sel]
        cx = np.bitwise_xor.reduce(xj, axis=1)
        cz = np.bitwise_xor.reduce(zj, axis=1)
        if not (np.array_equal(cx, bx) and np.array_equal(cz, bz)):
            raise TableauError("destabilizer expansion does not reproduce the operator")
        herm = int(_popc(xj & zj).sum())
        prefix = np.zeros_like(zj)
        prefix[:, 1:] = np.bitwise_xor.accumulate(zj, axis=1)[:, :-1]
        crossings = int(_popc(prefix & xj).sum())
        norm = int(_popc(bx & bz).sum())
        t = (2 * int(self.r[n + sel].sum()) + herm + 2 * crossings - norm) % 4
        if t % 2:
            raise TableauError("non-Hermitian phase in stabilizer product")
        return t // 2

    def in_stabilizer_group(self, b: PauliIndex) -> bool:
        """Fast membership test: b commutes with every stabilizer generator."""
        bx, bz = _pack(b, self.words)
        anti = (
            _popc(self.xs[:, self.n :] & bz[:, None]).sum(axis=0)
            + _popc(self.zs[:, self.n :] & bx[:, None]).sum(axis=0)
        ) % 2
        return not anti.any()

    def in_stabilizer_group_gauss(self, b: PauliIndex) -> bool:
        """Reference membership test by GF(2) Gaussian elimination."""
        rows = [self.stab_row(i).index.code() for i in range(self.n)]
        return _gf2_in_span(rows, b.code())

    # -- dense interface ----------------------------------------------------

    def stabilizer_group(self) -> list[PhasedPauli]:
        """All 2^n signed elements of the stabilizer group."""
        elements = [PhasedPauli.identity(self.n)]
        for i in range(self.n):
            gen = self.stab_row(i)
            elements += [multiply(e, gen) for e in elements]
        return elements

    def to_state(self) -> np.ndarray:
        """Dense projector of the represented state (n <= 6)."""
        if self.n > 6:
            raise TableauError("dense projector limited to n<=6")
        dim = 1 << self.n
        acc = np.zeros((dim, dim), dtype=complex)
        for e in self.stabilizer_group():
            acc += materialize(e)
        return acc / (1 << self.n)

    def canonical_key(self) -> frozenset:
        """Hashable key identifying the projector (basis independent)."""
        return frozenset((e.index.code(), e.sign_bit) for e in self.stabilizer_group())

    def canonical_label(self) -> str:
        """Comma-joined signed generators in reduced echelon form."""
        signed = {e.index.code(): e.sign_bit for e in self.stabilizer_group()}
        basis = _gf2_rref([self.stab_row(i).index.code() for i in range(self.n)])
        parts = []
        for code in basis:
            p = PhasedPauli(2 * signed[code], PauliIndex.from_code(self.n, code))
            parts.append(p.to_string())
        return ",".join(parts)

    # -- invariants ---------------------------------------------------------

    def validate(self) -> None:
        """Check the symplectic pairing, commutation, and rank invariants."""
        n = self.n
        codes = [self._row(i).index.code() for i in range(2 * n)]
        idx = [PauliIndex.from_code(n, c) for c in codes]
        for i in range(n):
            for j in range(n):
                if omega(idx[i], idx[n + j]) != (1 if i == j else 0):
                    raise TableauError(f"destab/stab pairing broken at ({i},{j})")
                if omega(idx[n + i], idx[n + j]) != 0:
                    raise TableauError(f"stabilizer rows {i},{j} anticommute")
                if omega(idx[i], idx[j]) != 0:
                    raise TableauError(f"destabilizer rows {i},{j} anticommute")
        if _gf2_rank(codes) != 2 * n:
            raise TableauError("tableau rows are not full rank")
        if any(int(v) not in (0, 1) for v in self.r):
            raise TableauError("phase bits out of range")


# -- GF(2) helpers ----------------------------------------------------------


def _gf2_rank(rows: list[int]) -> int:
    pivots: list[int] = []
    for row in rows:
        for p in pivots:
            row = min(row, row ^ p)
        if row:
            pivots.append(row)
    return len(pivots)


def _gf2_in_span(rows: list[int], target: int) -> bool:
    return _gf2_rank(rows) == _gf2_rank(rows + [target])


def _gf2_rref(rows: list[int]) -> list[int]:
    """Reduced echelon basis of the span, sorted by leading bit."""
    basis: list[int] = []
    for row in rows:
        for p in basis:
            row = min(row, row ^ p)
        if row:
            basis.append(row)
    basis.sort(reverse=True)
    for i in range(len(basis)):
        for j in range(i):
            basis[j] = min(basis[j], basis[j] ^ basis[i])
    return sorted(basis, reverse=True)


def _gf2_solve(equations: list[tuple[int, int]]) -> int:
    """One solution v of a linear system over GF(2).

    Each equation is (mask, rhs) demanding parity(v & mask) == rhs.
    Raises on inconsistency.  Free variables are set to zero.
    """
    pivots: list[tuple[int, int, int]] = []  # (pivot bit, mask, rhs)
    for mask, rhs in equations:
        for bit, pmask, prhs in pivots:
            if (mask >> bit) & 1:
                mask ^= pmask
                rhs ^= prhs
        if mask == 0:
            if rhs:
                raise TableauError("inconsistent linear system")
            continue
        pivots.append((mask.bit_length() - 1, mask, rhs))
    solution = 0
    # each pivot bit is the highest bit of its mask, so increasing order
    # guarantees every other variable in the mask is already decided
    for bit, mask, rhs in sorted(pivots):
        acc = rhs ^ ((solution & mask & ~(1 << bit)).bit_count() & 1)
        if acc:
            solution |= 1 << bit
    return solution


def _omega_code(a: int, b: int, n: int) -> int:
    mask = (1 << n) - 1
    ax, az = (a >> n) & mask, a & mask
    bx, bz = (b >> n) & mask, b & mask
    return ((ax & bz).bit_count() + (bx & az).bit_count()) % 2


def _sympl_mask(code: int, n: int) -> int:
    """Mask m with omega(v, code) = parity(v & m) for v in code coordinates."""
    mask = (1 << n) - 1
    x, z = (code >> n) & mask, code & mask
    return (z << n) | x


def _symplectic_complement(stab_codes: list[int], n: int) -> list[int]:
    """Destabilizer codes paired with given independent isotropic generators."""
    destabs: list[int] = []
    for i in range(n):
        eqs = [
            (_sympl_mask(code, n), 1 if j == i else 0)
            for j, code in enumerate(stab_codes)
        ]
        eqs += [(_sympl_mask(code, n), 0) for code in destabs]
        destabs.append(_gf2_solve(eqs))
    return destabs


# -- enumeration ------------------------------------------------------------


def maximal_isotropic_subspaces(n: int) -> list[list[int]]:
    """All maximal isotropic subspaces of Z2^{2n}, each as a sorted basis."""
    if n > 3:
        raise TableauError("subspace enumeration limited to n<=3")
    points = list(range(1, 4**n))
    seen: set[frozenset[int]] = set()
    result: list[list[int]] = []

    def extend(basis: list[int], span: set[int], start: int) -> None:
        if len(basis) == n:
            key = frozenset(span)
            if key not in seen:
                seen.add(key)
                result.append(sorted(basis))
            return
        for a in points[start - 1 :]:
            if a in span:
                continue
            if any(_omega_code(a, g, n) for g in basis):
                continue
            new_span = span | {s ^ a for s in span}
            extend(basis + [a], new_span, a + 1)

    extend([], {0}, 1)
    return result


def enumerate_stabilizer_states(n: int) -> list[StabilizerTableau]:
    """All distinct stabilizer states on n <= 3 qubits, each exactly once."""
    if n > 3:
        raise TableauError("stabilizer state enumeration limited to n<=3")
    states = []
    for basis in maximal_isotropic_subspaces(n):
        destabs = _symplectic_complement(basis, n)
        for phases in range(1 << n):
            t = StabilizerTableau(n)
            for i, code in enumerate(destabs):
                t.xs[:, i], t.zs[:, i] = _pack(PauliIndex.from_code(n, code), t.words)
            for i, code in enumerate(basis):
                t.xs[:, n + i], t.zs[:, n + i] = _pack(
                    PauliIndex.from_code(n, code), t.words
                )
                t.r[n + i] = (phases >> i) & 1
            states.append(t)
    return states
