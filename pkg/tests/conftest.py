"""Shared helpers for building random Clifford circuits and dense references."""

import numpy as np
import pytest

from polysim.oracle import gate_unitary
from polysim.pauli import GATE_KINDS, CliffordGate, PauliIndex


def random_gate(rng, n):
    kind = GATE_KINDS[rng.integers(len(GATE_KINDS))]
    if kind in ("CZ", "CNOT"):
        if n < 2:
            kind = "H"
        else:
            a, b = rng.choice(n, size=2, replace=False)
            return CliffordGate(kind, (int(a), int(b)))
    return CliffordGate(kind, (int(rng.integers(n)),))


def random_circuit(rng, n, length):
    return [random_gate(rng, n) for _ in range(length)]


def random_index(rng, n, nonzero=True):
    code = int(rng.integers(1 if nonzero else 0, 4**n))
    return PauliIndex.from_code(n, code)


def circuit_unitary(gates, n):
    u = np.eye(1 << n, dtype=complex)
    for g in gates:
        u = gate_unitary(g, n) @ u
    return u


def random_adaptive_circuit(rng, n, model="clifford", measurements=3, gates=6):
    """A random small circuit JSON with history-dependent measurement cases."""
    letters = "IXYZ"
    steps = []
    bits = 0

    def random_pauli_string(width):
        while True:
            s = "".join(letters[rng.integers(4)] for _ in range(width))
            if set(s) != {"I"}:
                sign = "-" if rng.integers(2) else "+"
                return sign + s

    if model == "clifford":
        for g in random_circuit(rng, n, gates):
            steps.append({"type": "gate", "name": g.kind, "qubits": list(g.qubits)})
    for _ in range(measurements):
        cases = {
            format(v, f"0{bits}b") if bits else "": random_pauli_string(n)
            for v in range(1 << bits)
        }
        steps.append({"type": "measure", "cases": cases})
        bits += 1
    resource = "zeros" if model == "clifford" else ("magic_t_all", "zeros")[int(rng.integers(2))]
    return {"model": model, "n": n, "resource": resource, "steps": steps}


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
