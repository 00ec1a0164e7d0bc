"""Dense complex-matrix reference engine for n <= 6 qubits.

Operators are plain numpy complex arrays of shape (2^n, 2^m); instruments are
outcome-indexed Kraus collections.  Everything here is meant to be slow,
obvious, and trustworthy: the rest of the package is tested against it.

Classical inputs and outcomes of instruments are strings of bits; trivial
(one-point) classical sets use the empty string "".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import MAX_DENSE_QUBITS, CliffordGate, PhasedPauli, materialize

ATOL = 1e-9

TRIVIAL = ("",)
BITS = ("0", "1")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_GATES_1Q = {"H": _H, "S": _S, "X": _X, "Y": _Y, "Z": _Z}

T_GATE = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)


class OracleError(ValueError):
    """Dimension mismatch, unknown label, or invalid operator."""


def qubit_count(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim <= 0 or 1 << n != dim:
        raise OracleError(f"dimension {dim} is not a power of two")
    return n


def _check_dense_scale(n: int) -> None:
    if n > MAX_DENSE_QUBITS:
        raise OracleError(f"dense engine limited to n<={MAX_DENSE_QUBITS}")


def zero_state(n: int) -> np.ndarray:
    """Projector onto |0...0>."""
    rho = np.zeros((1 << n, 1 << n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def ket_state(bits: str) -> np.ndarray:
    """Projector onto a computational basis vector given as a bit string."""
    idx = int(bits, 2) if bits else 0
    rho = np.zeros((1 << len(bits), 1 << len(bits)), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def plus_state(n: int) -> np.ndarray:
    dim = 1 << n
    return np.full((dim, dim), 1.0 / dim, dtype=complex)


def magic_t_state() -> np.ndarray:
    """The single-qubit magic state T |+><+| T^dagger, Bloch vector (1,1,0)/sqrt2."""
    return 0.5 * (np.eye(2) + (_X + _Y) / np.sqrt(2))


def gate_unitary(gate: CliffordGate, n: int) -> np.ndarray:
    """Dense unitary of an elementary Clifford gate embedded in n qubits.

    Qubit 0 is the most significant bit of the basis index.
    """
    gate.check_range(n)
    _check_dense_scale(n)
    dim = 1 << n
    if gate.kind in _GATES_1Q:
        q = gate.qubits[0]
        u = np.eye(1, dtype=complex)
        for k in range(n):
            u = np.kron(u, _GATES_1Q[gate.kind] if k == q else np.eye(2))
        return u
    posbit = lambda j, q: (j >> (n - 1 - q)) & 1  # noqa: E731
    c, t = gate.qubits
    if gate.kind == "CZ":
        diag = np.array([(-1.0) ** (posbit(j, c) & posbit(j, t)) for j in range(dim)])
        return np.diag(diag).astype(complex)
    u = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        i = j ^ (1 << (n - 1 - t)) if posbit(j, c) else j
        u[i, j] = 1.0
    return u


def graph_entangler(n: int, edges) -> np.ndarray:
    """Product of CZ gates over the edges of a graph on n vertices."""
    u = np.eye(1 << n, dtype=complex)
    for i, j in edges:
        u = gate_unitary(CliffordGate("CZ", (int(i), int(j))), n) @ u
    return u


def partial_trace(a: np.ndarray, qubit: int) -> np.ndarray:
    """Trace out one qubit; output dimension halves, trace is preserved."""
    n = qubit_count(a.shape[0])
    if a.shape[0] != a.shape[1]:
        raise OracleError("partial trace needs a square operator")
    if not 0 <= qubit < n:
        raise OracleError(f"qubit {qubit} out of range for n={n}")
    if n < 1:
        raise OracleError("nothing to trace out")
    tensor = a.reshape((2,) * (2 * n))
    return np.trace(tensor, axis1=qubit, axis2=n + qubit).reshape(
        (1 << (n - 1), 1 << (n - 1))
    )


def keep_qubit_kraus(n: int, qubit: int) -> list[np.ndarray]:
    """Kraus factors <j|_qubit ox 1 implementing the partial trace as a channel."""
    dim_in, dim_out = 1 << n, 1 << (n - 1)
    ops = []
    for j in (0, 1):
        k = np.zeros((dim_out, dim_in), dtype=complex)
        for col in range(dim_in):
            if (col >> (n - 1 - qubit)) & 1 == j:
                row = ((col >> (n - qubit)) << (n - 1 - qubit)) | (
                    col & ((1 << (n - 1 - qubit)) - 1)
                )
                k[row, col] = 1.0
        ops.append(k)
    return ops


def validate_state(a: np.ndarray, tol: float = ATOL):
    """Check trace-one positive semidefiniteness.

    Returns (True, None) on a valid density operator, otherwise
    (False, witness) where the witness is the offending trace or the most
    negative eigenvalue.
    """
    if not np.allclose(a, a.conj().T, atol=tol):
        raise OracleError("validate_state expects a Hermitian operator")
    tr = complex(np.trace(a)).real
    if abs(tr - 1.0) > tol:
        return False, tr
    lo = float(np.linalg.eigvalsh(a)[0])
    if lo < -tol:
        return False, lo
    return True, None


@dataclass
class DenseInstrument:
    """An adaptive instrument: completely positive maps Phi_a^s as Kraus lists.

    ``kraus[(a, s)]`` holds the Kraus factors of the map for classical input
    ``a`` and outcome ``s``; absent keys are the zero map.  For every input,
    the maps summed over outcomes must form a trace-preserving channel.
    """

    inputs: tuple[str, ...]
    outcomes: tuple[str, ...]
    dim_in: int
    dim_out: int
    kraus: dict = field(default_factory=dict)

    def kraus_ops(self, a: str, s: str) -> list[np.ndarray]:
        if a not in self.inputs:
            raise OracleError(f"unknown input label {a!r}")
        if s not in self.outcomes:
            raise OracleError(f"unknown outcome label {s!r}")
        return self.kraus.get((a, s), [])

    def apply_cp(self, a: str, s: str, rho: np.ndarray) -> np.ndarray:
        """Apply the completely positive map Phi_a^s to an operator."""
        if rho.shape != (self.dim_in, self.dim_in):
            raise OracleError(
                f"operator shape {rho.shape} does not match input dim {self.dim_in}"
            )
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        for k in self.kraus_ops(a, s):
            out += k @ rho @ k.conj().T
        return out

    def apply_channel(self, a: str, rho: np.ndarray) -> np.ndarray:
        """Sum of Phi_a^s over outcomes: the induced quantum channel."""
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        for s in self.outcomes:
            out += self.apply_cp(a, s, rho)
        return out

    def validate(self, tol: float = ATOL) -> None:
        """Check trace preservation sum_s sum_K K^dag K = 1 for every input."""
        eye = np.eye(self.dim_in)
        for a in self.inputs:
            total = np.zeros((self.dim_in, self.dim_in), dtype=complex)
            for s in self.outcomes:
                for k in self.kraus_ops(a, s):
                    if k.shape != (self.dim_out, self.dim_in):
                        raise OracleError("Kraus factor has wrong shape")
                    total += k.conj().T @ k
            if not np.allclose(total, eye, atol=tol):
                raise OracleError(f"instrument is not trace preserving at input {a!r}")


def unitary_instrument(u: np.ndarray) -> DenseInstrument:
    """The channel rho -> U rho U^dagger as a one-outcome instrument."""
    dim = u.shape[0]
    return DenseInstrument(TRIVIAL, TRIVIAL, dim, dim, {("", ""): [u.astype(complex)]})


def preparation_instrument(rho: np.ndarray, tol: float = ATOL) -> DenseInstrument:
    """State preparation from the scalars: alpha -> alpha * rho."""
    ok, witness = validate_state(rho, tol)
    if not ok:
        raise OracleError(f"preparation needs a density operator, witness {witness}")
    vals, vecs = np.linalg.eigh(rho)
    ops = [
        np.sqrt(val) * vecs[:, k : k + 1]
        for k, val in enumerate(vals)
        if val > tol
    ]
    return DenseInstrument(TRIVIAL, TRIVIAL, 1, rho.shape[0], {("", ""): ops})


def pauli_measurement_instrument(
    b: PhasedPauli, destructive: bool = False, qubit: int | None = None
) -> DenseInstrument:
    """The projective measurement of a signed Pauli observable.

    Outcome s corresponds to the eigenvalue (-1)^s of the observable; the
    projectors are (1 + (-1)^s B)/2.  In destructive mode ``b`` must act on a
    single qubit, which is measured and then traced out, halving the output
    dimension.
    """
    if not b.is_hermitian:
        raise OracleError("measurement requires a Hermitian (sign +-1) Pauli")
    _check_dense_scale(b.n)
    n, dim = b.n, 1 << b.n
    mat = materialize(b)
    projs = {s: (np.eye(dim) + (-1.0) ** int(s) * mat) / 2.0 for s in "01"}
    if not destructive:
        return DenseInstrument(
            TRIVIAL, BITS, dim, dim, {("", s): [projs[s]] for s in "01"}
        )
    support = [k for k in range(n) if b.index.bit(k) != (0, 0)]
    if len(support) != 1:
        raise OracleError("destructive measurement requires single-qubit support")
    if qubit is None:
        qubit = support[0]
    if qubit != support[0]:
        raise OracleError(f"operator acts on qubit {support[0]}, not {qubit}")
    if n < 1:
        raise OracleError("cannot trace out the last dimension below one qubit")
    keeps = keep_qubit_kraus(n, qubit)
    return DenseInstrument(
        TRIVIAL,
        BITS,
        dim,
        dim >> 1,
        {("", s): [k @ projs[s] for k in keeps] for s in "01"},
    )


def operator_to_json(a: np.ndarray) -> dict:
    n = qubit_count(a.shape[0])
    return {"n": n, "re": a.real.tolist(), "im": a.imag.tolist()}


def operator_from_json(data: dict) -> np.ndarray:
    try:
        n = int(data["n"])
        a = np.array(data["re"], dtype=float) + 1j * np.array(data["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise OracleError(f"malformed dense-operator JSON: {exc}") from exc
    if a.shape != (1 << n, 1 << n):
        raise OracleError("dense-operator JSON has inconsistent shape")
    return a
