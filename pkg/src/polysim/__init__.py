"""Polyhedral classical simulators for quantum circuits.

Subpackages cover the binary-symplectic Pauli algebra, a bit-packed
stabilizer tableau simulator, a dense-matrix reference engine, closed
non-contextual operators, the LP-based polytope machinery (membership,
robustness, preservation checks, update-map derivation), an adaptive
instrument circuit representation, and the simulation runners.
"""

__version__ = "0.1.0"
