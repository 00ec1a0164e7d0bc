"""Polytope engine over the Pauli coefficient coordinates.

A Hermitian trace-one operator A on n qubits is represented by the real
vector c with A = sum_a c_a T_a, indexed by the code order of
:meth:`polysim.pauli.PauliIndex.code`; trace one pins c_0 = 2^{-n}.  Vertex
sets collect labelled operators in these coordinates, and everything convex
(membership, robustness, preservation, update-map derivation, dual vertex
enumeration) runs through the simplex solver of :mod:`polysim.lp` or exact
rational arithmetic.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lp
from .cnc import CncLabel, cnc_coeffs, enumerate_maximal_cnc
from .oracle import DenseInstrument
from .pauli import PauliIndex, PhasedPauli, materialize
from .tableau import StabilizerTableau, enumerate_stabilizer_states

ATOL = 1e-9
_DEDUP_DECIMALS = 9


class GeometryError(ValueError):
    """Invalid polytope datum or failed precondition."""


# -- coefficient coordinates -------------------------------------------------

_basis_cache: dict[int, np.ndarray] = {}


def pauli_basis(n: int) -> np.ndarray:
    """Stacked dense Pauli operators T_a in code order, cached for n <= 4."""
    if n not in _basis_cache:
        mats = np.stack(
            [materialize(PhasedPauli(0, a)) for a in _all_points(n)]
        )
        if n <= 4:
            _basis_cache[n] = mats
        return mats
    return _basis_cache[n]


def _all_points(n: int):
    return [PauliIndex.from_code(n, c) for c in range(4**n)]


@dataclass(frozen=True)
class CoeffVector:
    """Pauli coefficients of a Hermitian trace-one operator."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.shape != (4**self.n,):
            raise GeometryError(f"expected {4 ** self.n} coefficients")
        if abs(coeffs[0] - 0.5**self.n) > ATOL:
            raise GeometryError("trace-one normalization c_0 = 2^-n violated")


def to_coeffs(a: np.ndarray, tol: float = ATOL) -> CoeffVector:
    """Expand a Hermitian trace-one matrix in the Pauli basis (exact round trip)."""
    dim = a.shape[0]
    n = dim.bit_length() - 1
    if a.shape != (dim, dim) or 1 << n != dim:
        raise GeometryError("operator shape is not a qubit dimension")
    if not np.allclose(a, a.conj().T, atol=tol):
        raise GeometryError("coefficient expansion expects a Hermitian operator")
    if abs(np.trace(a).real - 1.0) > tol:
        raise GeometryError("coefficient expansion expects trace one")
    basis = pauli_basis(n)
    coeffs = np.einsum("kij,ji->k", basis, a).real / dim
    return CoeffVector(n, coeffs)


def from_coeffs(v: CoeffVector) -> np.ndarray:
    basis = pauli_basis(v.n)
    return np.einsum("k,kij->ij", v.coeffs, basis)


# -- vertex sets --------------------------------------------------------------


class VertexSet:
    """Labelled Hermitian trace-one operators as rows of a coefficient matrix."""

    def __init__(self, n: int, labels, matrix):
        self.n = int(n)
        self.labels = tuple(str(s) for s in labels)
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (len(self.labels), 4**self.n):
            raise GeometryError("vertex matrix shape does not match labels")
        if len(set(self.labels)) != len(self.labels):
            raise GeometryError("duplicate vertex labels")
        if self.matrix.size and not np.allclose(
            self.matrix[:, 0], 0.5**self.n, atol=ATOL
        ):
            raise GeometryError("every vertex must satisfy c_0 = 2^-n")
        keys = {tuple(np.round(row, _DEDUP_DECIMALS)) for row in self.matrix}
        if len(keys) != len(self.labels):
            raise GeometryError("duplicate vertex vectors")
        self._index = {s: i for i, s in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def row(self, label: str) -> np.ndarray:
        try:
            return self.matrix[self._index[label]]
        except KeyError:
            raise GeometryError(f"unknown vertex label {label!r}") from None

    def vector(self, label: str) -> CoeffVector:
        return CoeffVector(self.n, self.row(label))

    def dense(self, label: str) -> np.ndarray:
        return from_coeffs(self.vector(label))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "vertices": [
                {"label": s, "coeffs": self.matrix[i].tolist()}
                for i, s in enumerate(self.labels)
            ],
        }

    @staticmethod
    def from_json(data: dict) -> "VertexSet":
        try:
            n = int(data["n"])
            labels = [v["label"] for v in data["vertices"]]
            matrix = [v["coeffs"] for v in data["vertices"]]
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed vertex-set JSON: {exc}") from exc
        return VertexSet(n, labels, matrix)


def _tableau_coeffs(t: StabilizerTableau) -> np.ndarray:
    coeffs = np.zeros(4**t.n)
    scale = 0.5**t.n
    for e in t.stabilizer_group():
        coeffs[e.index.code()] = scale * (-1.0) ** e.sign_bit
    return coeffs


@functools.lru_cache(maxsize=None)
def stabilizer_vertices(n: int) -> VertexSet:
    """All stabilizer states on n <= 3 qubits as a vertex set."""
    states = enumerate_stabilizer_states(n)
    return VertexSet(
        n,
        [t.canonical_label() for t in states],
        np.stack([_tableau_coeffs(t) for t in states]),
    )


@functools.lru_cache(maxsize=None)
def local_stabilizer_vertices(n: int) -> VertexSet:
    """Products of single-qubit Pauli eigenstates; equals all states at n = 1."""
    if n > 3:
        raise GeometryError("local stabilizer enumeration limited to n<=3")
    labels, rows = [], []
    for letters in itertools.product("XYZ", repeat=n):
        for signs in itertools.product("+-", repeat=n):
            gens = [
                PhasedPauli.from_string(
                    signs[q] + "".join(letters[q] if k == q else "I" for k in range(n))
                )
                for q in range(n)
            ]
            t = StabilizerTableau.from_stabilizers(gens)
            labels.append(t.canonical_label())
            rows.append(_tableau_coeffs(t))
    return VertexSet(n, labels, np.stack(rows))


def cnc_label_string(label: CncLabel) -> str:
    return ",".join(p.to_string() for p in label.omega_set) + ";" + "".join(
        str(g) for g in label.gamma
    )


@functools.lru_cache(maxsize=None)
def cnc_vertices(n: int) -> VertexSet:
    """Maximal CNC operators on n <= 2 qubits as a vertex set."""
    labels = enumerate_maximal_cnc(n)
    return VertexSet(
        n,
        [cnc_label_string(lab) for lab in labels],
        np.stack([cnc_coeffs(lab) for lab in labels]),
    )


def scalar_vertices() -> VertexSet:
    """The one-point vertex set of Herm_1(C) = {1} (zero qubits)."""
    return VertexSet(0, ["1"], [[1.0]])


# -- convex membership and robustness ----------------------------------------


@dataclass(frozen=True)
class MembershipResult:
    feasible: bool
    weights: dict | None = None  # label -> weight, convex
    certificate: np.ndarray | None = None  # separating functional on failure


def _check_target(target: CoeffVector, vset: VertexSet) -> None:
    if target.n != vset.n:
        raise GeometryError(
            f"target lives on {target.n} qubits, vertex set on {vset.n}"
        )


def membership(
    target: CoeffVector, vset: VertexSet, exact: bool = False
) -> MembershipResult:
    """Decide whether the target is a convex combination of the vertices.

    Feasible calls return witness weights that reproduce the target;
    infeasible calls return a separating functional y with
    y . (vertex, 1) <= 0 for every vertex but y . (target, 1) > 0.
    """
    _check_target(target, vset)
    a = np.vstack([vset.matrix.T, np.ones(len(vset))])
    b = np.concatenate([target.coeffs, [1.0]])
    res = lp.solve_lp(a, b, np.zeros(len(vset)), exact=exact)
    if res.status == lp.INFEASIBLE:
        y = np.asarray(res.dual, dtype=object if exact else float)
        margin = y @ b
        against = y @ a
        if not (margin > ATOL / 10 and np.all(np.asarray(against, dtype=float) <= ATOL)):
            raise GeometryError("separating functional failed self-test")
        return MembershipResult(False, certificate=y)
    weights = {s: res.x[i] for i, s in enumerate(vset.labels) if res.x[i] > 0}
    recon = vset.matrix.T.astype(object if exact else float) @ res.x
    err = np.max(np.abs(np.asarray(recon - b[:-1], dtype=float)))
    if err > ATOL:
        raise GeometryError("membership witness failed to reproduce the target")
    return MembershipResult(True, weights=weights)


@dataclass(frozen=True)
class Decomposition:
    """Affine decomposition target = sum_i weights_i * vertex_i, sum = 1."""

    labels: tuple[str, ...]
    weights: tuple
    negativity: object

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.weights):
            raise GeometryError("decomposition labels/weights mismatch")

    def sampling_distribution(self) -> np.ndarray:
        mags = np.array([abs(float(w)) for w in self.weights])
        return mags / mags.sum()

    def validate(self, target: CoeffVector, vset: VertexSet, tol: float = ATOL):
        total = math.fsum(float(w) for w in self.weights)
        if abs(total - 1.0) > tol:
            raise GeometryError("decomposition weights must sum to one")
        recon = sum(
            float(w) * vset.row(s) for s, w in zip(self.labels, self.weights)
        )
        if np.max(np.abs(recon - target.coeffs)) > tol:
            raise GeometryError("decomposition does not reproduce the target")


def robustness(
    target: CoeffVector, vset: VertexSet, exact: bool = False
) -> tuple[object, Decomposition]:
    """Minimal total variation min sum |r_i| over affine vertex decompositions.

    Signed weights are split into positive and negative parts; the value is
    at least 1 and equals 1 exactly on members of the convex hull.  Raises
    when the target lies outside the affine span.
    """
    _check_target(target, vset)
    nv = len(vset)
    block = np.vstack([vset.matrix.T, np.ones(nv)])
    a = np.hstack([block, -block])
    b = np.concatenate([target.coeffs, [1.0]])
    res = lp.solve_lp(a, b, np.ones(2 * nv), exact=exact)
    if res.status != lp.OPTIMAL:
        raise GeometryError("target is outside the affine span of the vertex set")
    r = res.x[:nv] - res.x[nv:]
    support = [i for i in range(nv) if r[i] != 0]
    decomp = Decomposition(
        tuple(vset.labels[i] for i in support),
        tuple(r[i] for i in support),
        res.objective,
    )
    decomp.validate(target, vset, tol=1e-7)
    value = res.objective
    if float(value) < 1.0 - 1e-7:
        raise GeometryError("robustness below one: vertex set is degenerate")
    return value, decomp


# -- preservation -------------------------------------------------------------


@dataclass(frozen=True)
class PreservationViolation:
    input: str
    vertex: str
    outcome: str
    kind: str  # negative-weight | nonzero-kernel | outside-hull
    detail: str
    certificate: np.ndarray | None = None


@dataclass
class PreservationReport:
    passed: bool
    checks: int
    violations: list[PreservationViolation] = field(default_factory=list)


def _branch_images(instr: DenseInstrument, a: str, rho: np.ndarray, tol: float):
    """Yield (outcome, weight, normalized image | None) for one input state."""
    for s in instr.outcomes:
        out = instr.apply_cp(a, s, rho)
        weight = float(np.trace(out).real)
        if weight <= tol:
            yield s, weight, out, None
        else:
            yield s, weight, out, out / weight


def check_preservation(
    instr: DenseInstrument,
    vset_in: VertexSet,
    vset_out: VertexSet,
    tol: float = ATOL,
) -> PreservationReport:
    """Check that an instrument maps input vertices into the output hull.

    For every classical input, vertex, and outcome: the branch weight must
    be nonnegative; positive-weight images, normalized, must be convex
    combinations of the output vertices; zero-weight images must vanish in
    max norm.
    """
    if instr.dim_in != 1 << vset_in.n or instr.dim_out != 1 << vset_out.n:
        raise GeometryError("instrument dimensions do not match the vertex sets")
    report = PreservationReport(True, 0)
    for a in instr.inputs:
        for xlabel in vset_in.labels:
            rho = from_coeffs(vset_in.vector(xlabel))
            for s, weight, raw, image in _branch_images(instr, a, rho, tol):
                report.checks += 1
                if weight < -tol:
                    report.violations.append(
                        PreservationViolation(
                            a, xlabel, s, "negative-weight", f"trace {weight}"
                        )
                    )
                    continue
                if image is None:
                    err = float(np.max(np.abs(raw)))
                    if err > tol:
                        report.violations.append(
                            PreservationViolation(
                                a, xlabel, s, "nonzero-kernel", f"max-norm {err}"
                            )
                        )
                    continue
                res = membership(to_coeffs(image, tol=1e-7), vset_out)
                if not res.feasible:
                    report.violations.append(
                        PreservationViolation(
                            a,
                            xlabel,
                            s,
                            "outside-hull",
                            f"normalized branch image of weight {weight:.6g}",
                            res.certificate,
                        )
                    )
    report.passed = not report.violations
    return report


# -- update maps --------------------------------------------------------------


def _exact_unit_sum(probs: list[float]) -> list[float]:
    """Rescale nonnegative weights so math.fsum over them is exactly 1.0."""
    total = math.fsum(probs)
    if total <= 0:
        raise GeometryError("cannot normalize an empty move list")
    probs = [p / total for p in probs]
    top = max(range(len(probs)), key=lambda i: probs[i])
    for _ in range(10):
        drift = math.fsum(probs) - 1.0
        if drift == 0.0:
            return probs
        probs[top] -= drift
    raise GeometryError("failed to normalize move probabilities")


class UpdateMapTable:
    """Stochastic transitions (x, a) -> distribution over (y, s) pairs."""

    def __init__(self, entries: dict):
        self.entries = {
            (str(x), str(a)): tuple((str(y), str(s), float(p)) for y, s, p in moves)
            for (x, a), moves in entries.items()
        }

    def moves(self, x: str, a: str):
        try:
            return self.entries[(x, a)]
        except KeyError:
            raise GeometryError(f"missing table entry for vertex {x!r}, input {a!r}") from None

    def validate(self, tol: float = 0.0) -> None:
        for (x, a), moves in self.entries.items():
            if any(p < -tol for _, _, p in moves):
                raise GeometryError(f"negative probability at ({x}, {a})")
            total = math.fsum(p for _, _, p in moves)
            if abs(total - 1.0) > tol:
                raise GeometryError(
                    f"moves at ({x}, {a}) sum to {total!r}, expected 1"
                )

    def to_json(self) -> dict:
        return {
            "entries": [
                {
                    "x": x,
                    "a": a,
                    "moves": [{"y": y, "s": s, "p": p} for y, s, p in moves],
                }
                for (x, a), moves in sorted(self.entries.items())
            ]
        }

    @staticmethod
    def from_json(data: dict) -> "UpdateMapTable":
        try:
            entries = {
                (e["x"], e["a"]): [(m["y"], m["s"], m["p"]) for m in e["moves"]]
                for e in data["entries"]
            }
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed update-table JSON: {exc}") from exc
        return UpdateMapTable(entries)


def derive_update_map(
    instr: DenseInstrument,
    vset_in: VertexSet,
    vset_out: VertexSet,
    tol: float = ATOL,
) -> UpdateMapTable:
    """Construct a stochastic update table reproducing the instrument.

    For each input and vertex, every positive-weight branch image is
    decomposed over the output vertices by the membership program and the
    witness weights are scaled by the branch weight, so that
    sum_y q(y, s) B_y equals the branch image and the moves sum to one.
    The table is not unique; any feasible witness is accepted.
    """
    if instr.dim_in != 1 << vset_in.n or instr.dim_out != 1 << vset_out.n:
        raise GeometryError("instrument dimensions do not match the vertex sets")
    entries = {}
    for a in instr.inputs:
        for xlabel in vset_in.labels:
            rho = from_coeffs(vset_in.vector(xlabel))
            moves: list[tuple[str, str, float]] = []
            for s, weight, raw, image in _branch_images(instr, a, rho, tol):
                if weight < -tol:
                    raise GeometryError(
                        f"preservation fails: negative weight at ({xlabel}, {a}, {s})"
                    )
                if image is None:
                    if float(np.max(np.abs(raw))) > tol:
                        raise GeometryError(
                            f"preservation fails: trace-zero branch at "
                            f"({xlabel}, {a}, {s}) is not the zero map"
                        )
                    continue
                res = membership(to_coeffs(image, tol=1e-7), vset_out)
                if not res.feasible:
                    raise GeometryError(
                        f"preservation fails: branch image at ({xlabel}, {a}, {s}) "
                        "is outside the output hull"
                    )
                for y, lam in res.weights.items():
                    p = weight * float(lam)
                    if p > 1e-12:
                        moves.append((y, s, p))
            probs = _exact_unit_sum([p for _, _, p in moves])
            entries[(xlabel, a)] = [
                (y, s, p) for (y, s, _), p in zip(moves, probs)
            ]
    table = UpdateMapTable(entries)
    table.validate()
    return table


def check_simulates(
    table: UpdateMapTable,
    instr: DenseInstrument,
    vset_in: VertexSet,
    vset_out: VertexSet,
    tol: float = ATOL,
) -> float:
    """Maximum entrywise error of the simulation diagram over all entries.

    For every input a and vertex x the pushforward of the table through the
    output vertices must reproduce each branch image:
    sum_{y} q_{x,a}(y, s) B_y = Phi_a^s(A_x) for every outcome s.
    """
    worst = 0.0
    for a in instr.inputs:
        for xlabel in vset_in.labels:
            rho = from_coeffs(vset_in.vector(xlabel))
            moves = table.moves(xlabel, a)
            for s in instr.outcomes:
                want = instr.apply_cp(a, s, rho)
                got = np.zeros((instr.dim_out, instr.dim_out), dtype=complex)
                for y, ms, p in moves:
                    if ms == s:
                        got += p * vset_out.dense(y)
                worst = max(worst, float(np.max(np.abs(got - want))))
    if worst > tol:
        raise GeometryError(f"simulation diagram fails by {worst:.3e}")
    return worst


def star_compose_tables(
    first: UpdateMapTable, second: UpdateMapTable
) -> UpdateMapTable:
    """Adaptive composition of update tables with history-concatenated inputs.

    The second table is keyed by (y, a + s): its classical input is the
    history extended by the first table's outcome.  The composite maps
    (x, a) to (z, s + r) with probability
    sum_y second_{y, a+s}(z, r) first_{x, a}(y, s).
    """
    entries: dict = {}
    for (x, a), moves in first.entries.items():
        acc: dict[tuple[str, str], float] = {}
        for y, s, p in moves:
            for z, r, q in second.moves(y, a + s):
                key = (z, s + r)
                acc[key] = acc.get(key, 0.0) + p * q
        flat = [(z, sr, p) for (z, sr), p in sorted(acc.items()) if p > 0]
        probs = _exact_unit_sum([p for _, _, p in flat])
        entries[(x, a)] = [(z, sr, p) for (z, sr, _), p in zip(flat, probs)]
    table = UpdateMapTable(entries)
    table.validate()
    return table


# -- dual vertex enumeration ---------------------------------------------------


def _frac_rank(rows: list[tuple[Fraction, ...]]) -> int:
    mat = [list(r) for r in rows]
    rank, ncols = 0, len(mat[0]) if mat else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(mat)) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        inv = mat[rank][col]
        for i in range(len(mat)):
            if i != rank and mat[i][col] != 0:
                f = mat[i][col] / inv
                mat[i] = [u - f * v for u, v in zip(mat[i], mat[rank])]
        rank += 1
        if rank == len(mat):
            break
    return rank


def dual_vertices(vset: VertexSet, allow_large: bool = False) -> VertexSet:
    """Vertices of {A in Herm_1 : Tr(A Pi) >= 0 for every vertex Pi}.

    Incremental halfspace insertion in exact rational arithmetic over the
    4^n - 1 free coefficients, starting from a bounding simplex; a point is
    kept as a vertex when its active constraints have full rank.  The
    required scope is n = 1; n >= 2 is exponential and must be requested
    explicitly.
    """
    n = vset.n
    if n > 1 and not allow_large:
        raise GeometryError(
            "dual vertex enumeration beyond n=1 must be requested explicitly"
        )
    d = 4**n - 1
    c0 = Fraction(1, 2**n)
    halfspaces = []  # (normal tuple, rhs): normal . x >= rhs
    for row in vset.matrix:
        normal = tuple(Fraction(v) for v in row[1:])
        halfspaces.append((normal, -Fraction(row[0]) * c0))

    bound = Fraction(4)
    for _ in range(4):
        verts = _dual_dd(halfspaces, d, bound)
        if verts is not None:
            break
        bound *= 8
    else:
        raise GeometryError("dual body does not appear bounded")
    verts = sorted(verts)
    labels = [f"v{i}" for i in range(len(verts))]
    matrix = np.array([[float(c0)] + [float(v) for v in vert] for vert in verts])
    return VertexSet(n, labels, matrix)


def _dual_dd(halfspaces, d: int, bound: Fraction):
    """Double-description sweep; None when the bounding simplex is touched."""
    msum = bound * d
    simplex = [(tuple(Fraction(int(i == k)) for i in range(d)), -bound) for k in range(d)]
    simplex.append((tuple(Fraction(-1) for _ in range(d)), -msum))
    apex = tuple(-bound for _ in range(d))
    verts: set[tuple[Fraction, ...]] = {apex}
    for k in range(d):
        v = list(apex)
        v[k] = msum + (d - 1) * bound
        verts.add(tuple(v))
    processed = list(simplex)

    def value(normal, rhs, point):
        return sum(a * x for a, x in zip(normal, point)) - rhs

    for normal, rhs in halfspaces:
        vals = {v: value(normal, rhs, v) for v in verts}
        inside = {v for v in verts if vals[v] >= 0}
        outside = verts - inside
        processed.append((normal, rhs))
        if not outside:
            verts = inside
            continue
        candidates: set[tuple[Fraction, ...]] = set()
        for u in inside:
            if vals[u] == 0:
                continue
            for w in outside:
                t = vals[u] / (vals[u] - vals[w])
                p = tuple(a + t * (b - a) for a, b in zip(u, w))
                candidates.add(p)
        new_verts = set(inside)
        for p in candidates:
            active = []
            ok = True
            for cn, cr in processed:
                val = value(cn, cr, p)
                if val < 0:
                    ok = False
                    break
                if val == 0:
                    active.append(cn)
            if ok and len(active) >= d and _frac_rank(active) == d:
                new_verts.add(p)
        verts = new_verts
    # the bounding simplex must be strictly slack at every final vertex
    for v in verts:
        for normal, rhs in simplex:
            if value(normal, rhs, v) == 0:
                return None
    return verts
