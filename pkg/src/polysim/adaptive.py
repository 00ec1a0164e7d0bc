"""Adaptive-instrument circuit representation and exact Born evaluation.

A computation is a state preparation followed by steps whose classical
input is the string of all earlier outcome bits (the history).  Steps are

* ``gate``: an elementary Clifford gate (no outcome),
* ``measure``: a non-destructive signed Pauli measurement whose operator is
  chosen per history through an explicit case table,
* ``local_measure``: a destructive single-qubit X/Y/Z measurement on an
  original qubit label; the measured qubit is traced out,
* ``feedforward``: a deterministic output bit given by an affine function
  of the history, acting as the identity on the register.

Case tables map full-width history strings to operators; the key ``"*"``
is an optional fallback.  Instruments are composed horizontally (quantum
chaining), vertically (tensoring with classical chaining), or adaptively
(star), with classical inputs chained by history concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .oracle import (
    DenseInstrument,
    OracleError,
    gate_unitary,
    graph_entangler,
    keep_qubit_kraus,
    magic_t_state,
    plus_state,
    validate_state,
    zero_state,
    operator_from_json,
    operator_to_json,
)
from .pauli import CliffordGate, PauliError, PhasedPauli, materialize

MAX_BORN_QUBITS = 6
MAX_OUTCOME_BITS = 16

MODELS = ("pauli", "local_pauli", "clifford")
RESOURCES = ("zeros", "plus_all", "magic_t_all")


class AdaptiveError(ValueError):
    """Malformed computation: bad wiring, arity, or model constraint."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        prefix = f"step {step}: " if step is not None else ""
        super().__init__(prefix + message)


# -- steps ---------------------------------------------------------------------


@dataclass(frozen=True)
class GateStep:
    gate: CliffordGate

    outcome_bits = 0


@dataclass(frozen=True)
class MeasureStep:
    """Non-destructive measurement of a history-dependent signed Pauli."""

    cases: dict

    outcome_bits = 1


@dataclass(frozen=True)
class LocalMeasureStep:
    """Destructive single-qubit measurement on an original qubit label."""

    qubit: int
    cases: dict  # history -> single-qubit signed PhasedPauli

    outcome_bits = 1


@dataclass(frozen=True)
class FeedforwardStep:
    """Deterministic bit const + sum(affine . history) mod 2."""

    affine: tuple[int, ...]
    const: int

    outcome_bits = 1


Step = Union[GateStep, MeasureStep, LocalMeasureStep, FeedforwardStep]


def _resolve_case(cases: dict, history: str, step: int):
    op = cases.get(history, cases.get("*"))
    if op is None:
        raise AdaptiveError(f"no case for history {history!r}", step)
    return op


# -- the computation -----------------------------------------------------------


class AdaptiveComputation:
    """A preparation plus adaptively wired steps, evaluated branch by branch."""

    def __init__(self, model, n, resource, steps, graph=()):
        self.model = str(model)
        self.n = int(n)
        self.resource = resource
        self.graph = tuple((int(i), int(j)) for i, j in graph)
        self.steps = tuple(steps)
        self.validate()

    # -- structural checks ------------------------------------------------

    def validate(self) -> None:
        if self.model not in MODELS:
            raise AdaptiveError(f"unknown model {self.model!r}")
        if self.n < 1:
            raise AdaptiveError("computation needs at least one qubit")
        if isinstance(self.resource, str):
            if self.resource not in RESOURCES:
                raise AdaptiveError(f"unknown resource {self.resource!r}")
        else:
            ok, witness = validate_state(np.asarray(self.resource, dtype=complex))
            if not ok:
                raise AdaptiveError(f"resource state invalid, witness {witness}")
            if np.asarray(self.resource).shape != (1 << self.n, 1 << self.n):
                raise AdaptiveError("resource state has the wrong dimension")
        for i, j in self.graph:
            if not (0 <= i < self.n and 0 <= j < self.n and i != j):
                raise AdaptiveError(f"graph edge ({i},{j}) out of range")
        allowed = {
            "pauli": (MeasureStep,),
            "clifford": (GateStep, MeasureStep),
            "local_pauli": (LocalMeasureStep, FeedforwardStep),
        }[self.model]
        bits = 0
        alive = list(range(self.n))
        for k, step in enumerate(self.steps):
            if not isinstance(step, allowed):
                raise AdaptiveError(
                    f"step type {type(step).__name__} not allowed in model "
                    f"{self.model}", k
                )
            if isinstance(step, GateStep):
                try:
                    step.gate.check_range(len(alive))
                except PauliError as exc:
                    raise AdaptiveError(str(exc), k) from exc
            elif isinstance(step, MeasureStep):
                self._check_cases(step.cases, bits, len(alive), k)
            elif isinstance(step, LocalMeasureStep):
                if step.qubit not in alive:
                    raise AdaptiveError(
                        f"qubit {step.qubit} already measured or out of range", k
                    )
                self._check_cases(step.cases, bits, 1, k)
                alive.remove(step.qubit)
            elif isinstance(step, FeedforwardStep):
                if len(step.affine) != bits:
                    raise AdaptiveError(
                        f"affine arity {len(step.affine)} != history width {bits}", k
                    )
                if step.const not in (0, 1) or any(c not in (0, 1) for c in step.affine):
                    raise AdaptiveError("affine coefficients must be bits", k)
            bits += step.outcome_bits
        if bits > MAX_OUTCOME_BITS:
            raise AdaptiveError(f"too many outcome bits ({bits})")

    @staticmethod
    def _check_cases(cases, bits, width, k) -> None:
        if not cases:
            raise AdaptiveError("empty case table", k)
        for key, op in cases.items():
            if key != "*" and (len(key) != bits or any(ch not in "01" for ch in key)):
                raise AdaptiveError(
                    f"case key {key!r} does not match history width {bits}", k
                )
            if not isinstance(op, PhasedPauli) or not op.is_hermitian:
                raise AdaptiveError("case values must be signed Paulis", k)
            if op.n != width:
                raise AdaptiveError(
                    f"case operator acts on {op.n} qubits, expected {width}", k
                )
            if op.index.is_zero:
                raise AdaptiveError("case operator must not be the identity", k)
        if "*" not in cases and len(cases) != 1 << bits:
            raise AdaptiveError(
                f"case table covers {len(cases)} of {1 << bits} histories "
                "and has no '*' fallback", k
            )

    # -- wiring helpers -----------------------------------------------------

    def outcome_bits_before(self, index: int) -> int:
        return sum(s.outcome_bits for s in self.steps[:index])

    def total_outcome_bits(self) -> int:
        return self.outcome_bits_before(len(self.steps))

    def qubits_before(self, index: int) -> list[int]:
        alive = list(range(self.n))
        for step in self.steps[:index]:
            if isinstance(step, LocalMeasureStep):
                alive.remove(step.qubit)
        return alive

    # -- dense semantics -----------------------------------------------------

    def initial_state(self) -> np.ndarray:
        if self.n > MAX_BORN_QUBITS:
            raise AdaptiveError(f"dense evaluation limited to n<={MAX_BORN_QUBITS}")
        if isinstance(self.resource, str):
            rho = {
                "zeros": zero_state,
                "plus_all": plus_state,
                "magic_t_all": _magic_all,
            }[self.resource](self.n)
        else:
            rho = np.asarray(self.resource, dtype=complex)
        if self.graph:
            u = graph_entangler(self.n, self.graph)
            rho = u @ rho @ u.conj().T
        return rho

    def _step_branches(self, index: int, history: str, rho: np.ndarray):
        """Yield (outcome string, unnormalized state) for one step and branch."""
        step = self.steps[index]
        alive = self.qubits_before(index)
        m = len(alive)
        if isinstance(step, GateStep):
            u = gate_unitary(step.gate, m)
            yield "", u @ rho @ u.conj().T
            return
        if isinstance(step, FeedforwardStep):
            bit = (step.const + sum(
                c * int(h) for c, h in zip(step.affine, history)
            )) % 2
            yield str(bit), rho
            return
        if isinstance(step, MeasureStep):
            op = materialize(_resolve_case(step.cases, history, index))
            for s in "01":
                proj = (np.eye(1 << m) + (-1.0) ** int(s) * op) / 2
                yield s, proj @ rho @ proj
            return
        # destructive local measurement
        pos = alive.index(step.qubit)
        letter = _resolve_case(step.cases, history, index)
        embedded = PhasedPauli(
            letter.phase,
            _embed_single(letter, pos, m),
        )
        op = materialize(embedded)
        keeps = keep_qubit_kraus(m, pos)
        for s in "01":
            proj = (np.eye(1 << m) + (-1.0) ** int(s) * op) / 2
            yield s, sum(k @ proj @ rho @ proj @ k.conj().T for k in keeps)

    def evaluate_born(self, prune: float = 1e-12) -> "BornResult":
        """Exact branch-by-branch distribution with conditional post-states."""
        branches = {"": self.initial_state()}
        for index in range(len(self.steps)):
            grown: dict[str, np.ndarray] = {}
            for history, rho in branches.items():
                for s, out in self._step_branches(index, history, rho):
                    if float(np.trace(out).real) > prune or s == "":
                        key = history + s
                        grown[key] = grown.get(key, 0) + out
            branches = grown
        probs, posts = {}, {}
        for history, rho in branches.items():
            p = float(np.trace(rho).real)
            if p > prune:
                probs[history] = p
                posts[history] = rho / p
        total = sum(probs.values())
        if abs(total - 1.0) > 1e-9:
            raise AdaptiveError(f"branch probabilities sum to {total}")
        return BornResult(probs, posts)

    # -- per-step instruments -------------------------------------------------

    def step_instrument(self, index: int) -> DenseInstrument:
        """The step as an adaptive instrument over all histories of its arity."""
        step = self.steps[index]
        bits = self.outcome_bits_before(index)
        alive = self.qubits_before(index)
        m = len(alive)
        inputs = tuple(_bitstrings(bits))
        dim = 1 << m
        if isinstance(step, GateStep):
            u = gate_unitary(step.gate, m)
            return DenseInstrument(
                inputs, ("",), dim, dim, {(a, ""): [u] for a in inputs}
            )
        if isinstance(step, FeedforwardStep):
            eye = np.eye(dim, dtype=complex)
            kraus = {}
            for a in inputs:
                bit = (step.const + sum(c * int(h) for c, h in zip(step.affine, a))) % 2
                kraus[(a, str(bit))] = [eye]
            return DenseInstrument(inputs, ("0", "1"), dim, dim, kraus)
        if isinstance(step, MeasureStep):
            kraus = {}
            for a in inputs:
                op = materialize(_resolve_case(step.cases, a, index))
                for s in "01":
                    proj = (np.eye(dim) + (-1.0) ** int(s) * op) / 2
                    kraus[(a, s)] = [proj]
            return DenseInstrument(inputs, ("0", "1"), dim, dim, kraus)
        pos = alive.index(step.qubit)
        keeps = keep_qubit_kraus(m, pos)
        kraus = {}
        for a in inputs:
            letter = _resolve_case(step.cases, a, index)
            op = materialize(PhasedPauli(letter.phase, _embed_single(letter, pos, m)))
            for s in "01":
                proj = (np.eye(dim) + (-1.0) ** int(s) * op) / 2
                kraus[(a, s)] = [k @ proj for k in keeps]
        return DenseInstrument(inputs, ("0", "1"), dim, dim >> 1, kraus)

    def preparation_instrument(self) -> DenseInstrument:
        rho = self.initial_state()
        vals, vecs = np.linalg.eigh(rho)
        ops = [np.sqrt(v) * vecs[:, k : k + 1] for k, v in enumerate(vals) if v > 1e-12]
        return DenseInstrument(("",), ("",), 1, rho.shape[0], {("", ""): ops})

    def composite_instrument(self) -> DenseInstrument:
        """Star composition of the preparation and every step."""
        instr = self.preparation_instrument()
        for index in range(len(self.steps)):
            instr = star_compose(instr, self.step_instrument(index))
        return instr

    # -- serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        steps = []
        for step in self.steps:
            if isinstance(step, GateStep):
                steps.append(
                    {"type": "gate", "name": step.gate.kind,
                     "qubits": list(step.gate.qubits)}
                )
            elif isinstance(step, MeasureStep):
                steps.append(
                    {"type": "measure",
                     "cases": {k: v.to_string() for k, v in sorted(step.cases.items())}}
                )
            elif isinstance(step, LocalMeasureStep):
                steps.append(
                    {"type": "local_measure", "qubit": step.qubit,
                     "cases": {k: v.to_string() for k, v in sorted(step.cases.items())}}
                )
            else:
                steps.append(
                    {"type": "feedforward", "affine": list(step.affine),
                     "const": step.const}
                )
        data = {"model": self.model, "n": self.n, "steps": steps}
        if isinstance(self.resource, str):
            data["resource"] = self.resource
        else:
            data["resource"] = {"state": operator_to_json(np.asarray(self.resource))}
        if self.graph:
            data["graph"] = [list(e) for e in self.graph]
        return data

    @staticmethod
    def from_json(data: dict) -> "AdaptiveComputation":
        if not isinstance(data, dict):
            raise AdaptiveError("circuit JSON must be an object")
        try:
            model = data["model"]
            n = int(data["n"])
            raw_steps = data.get("steps", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise AdaptiveError(f"missing or malformed field: {exc}") from exc
        resource = data.get("resource", "zeros")
        if isinstance(resource, dict):
            try:
                resource = operator_from_json(resource["state"])
            except (KeyError, OracleError) as exc:
                raise AdaptiveError(f"malformed resource state: {exc}") from exc
        graph = data.get("graph", [])
        steps = [_step_from_json(raw, k) for k, raw in enumerate(raw_steps)]
        return AdaptiveComputation(model, n, resource, steps, graph)


@dataclass(frozen=True)
class BornResult:
    probabilities: dict
    post_states: dict = field(repr=False, default_factory=dict)


def _magic_all(n: int) -> np.ndarray:
    rho = np.eye(1, dtype=complex)
    for _ in range(n):
        rho = np.kron(rho, magic_t_state())
    return rho


def _embed_single(letter: PhasedPauli, pos: int, m: int):
    xb, zb = letter.index.x & 1, letter.index.z & 1
    from .pauli import PauliIndex

    return PauliIndex(m, xb << pos, zb << pos)


def _bitstrings(bits: int):
    if bits == 0:
        return [""]
    return [format(v, f"0{bits}b") for v in range(1 << bits)]


def _parse_case_table(raw: dict, k: int) -> dict:
    try:
        return {str(key): PhasedPauli.from_string(val) for key, val in raw.items()}
    except (PauliError, AttributeError) as exc:
        raise AdaptiveError(f"bad case table: {exc}", k) from exc


def _step_from_json(raw: dict, k: int) -> Step:
    if not isinstance(raw, dict) or "type" not in raw:
        raise AdaptiveError("step must be an object with a 'type'", k)
    kind = raw["type"]
    try:
        if kind == "gate":
            return GateStep(CliffordGate(raw["name"], tuple(raw["qubits"])))
        if kind == "measure":
            return MeasureStep(_parse_case_table(raw["cases"], k))
        if kind == "local_measure":
            return LocalMeasureStep(int(raw["qubit"]), _parse_case_table(raw["cases"], k))
        if kind == "feedforward":
            return FeedforwardStep(tuple(int(c) for c in raw["affine"]), int(raw["const"]))
    except (KeyError, TypeError, ValueError, PauliError) as exc:
        raise AdaptiveError(f"malformed {kind} step: {exc}", k) from exc
    raise AdaptiveError(f"unknown step type {kind!r}", k)


# -- model builders ------------------------------------------------------------


def build_pauli_model(spec: dict) -> AdaptiveComputation:
    """Resource preparation followed by non-destructive Pauli measurements."""
    comp = AdaptiveComputation.from_json(spec)
    if comp.model != "pauli":
        raise AdaptiveError(f"expected model 'pauli', got {comp.model!r}")
    return comp


def build_local_pauli_model(spec: dict) -> AdaptiveComputation:
    """Graph-entangled resource with destructive local measurements."""
    comp = AdaptiveComputation.from_json(spec)
    if comp.model != "local_pauli":
        raise AdaptiveError(f"expected model 'local_pauli', got {comp.model!r}")
    return comp


# -- instrument composition ----------------------------------------------------


def star_compose(first: DenseInstrument, second: DenseInstrument) -> DenseInstrument:
    """Adaptive composition: the second instrument reads the extended history.

    Requires second.inputs == {a + s} over the first instrument's inputs and
    outcomes; the composite maps input a to outcome s + r with the map
    second_{a+s}^r o first_a^s.
    """
    want = {a + s for a in first.inputs for s in first.outcomes}
    if set(second.inputs) != want:
        raise AdaptiveError(
            "second instrument's inputs must be the first's extended histories"
        )
    if second.dim_in != first.dim_out:
        raise AdaptiveError("instrument dimensions do not chain")
    outcomes = tuple(
        s + r for s in first.outcomes for r in second.outcomes
    )
    kraus = {}
    for a in first.inputs:
        for s in first.outcomes:
            for r in second.outcomes:
                ops = [
                    k2 @ k1
                    for k1 in first.kraus.get((a, s), [])
                    for k2 in second.kraus.get((a + s, r), [])
                ]
                if ops:
                    kraus[(a, s + r)] = ops
    return DenseInstrument(first.inputs, outcomes, first.dim_in, second.dim_out, kraus)


def horizontal_compose(first: DenseInstrument, second: DenseInstrument) -> DenseInstrument:
    """Quantum chaining with independent classical wires."""
    if second.dim_in != first.dim_out:
        raise AdaptiveError("instrument dimensions do not chain")
    inputs = tuple(a1 + a2 for a1 in first.inputs for a2 in second.inputs)
    outcomes = tuple(s1 + s2 for s1 in first.outcomes for s2 in second.outcomes)
    kraus = {}
    for a1 in first.inputs:
        for a2 in second.inputs:
            for s1 in first.outcomes:
                for s2 in second.outcomes:
                    ops = [
                        k2 @ k1
                        for k1 in first.kraus.get((a1, s1), [])
                        for k2 in second.kraus.get((a2, s2), [])
                    ]
                    if ops:
                        kraus[(a1 + a2, s1 + s2)] = ops
    return DenseInstrument(inputs, outcomes, first.dim_in, second.dim_out, kraus)


def vertical_compose(top: DenseInstrument, bottom: DenseInstrument) -> DenseInstrument:
    """Tensor on the quantum wires, chain on the classical wires.

    The top instrument's outcome feeds the bottom instrument's input and is
    summed out; the composite's outcome is the bottom's.
    """
    if set(bottom.inputs) != set(top.outcomes):
        raise AdaptiveError("bottom inputs must equal top outcomes")
    kraus = {}
    for a in top.inputs:
        for s in bottom.outcomes:
            ops = []
            for b in top.outcomes:
                ops += [
                    np.kron(k1, k2)
                    for k1 in top.kraus.get((a, b), [])
                    for k2 in bottom.kraus.get((b, s), [])
                ]
            if ops:
                kraus[(a, s)] = ops
    return DenseInstrument(
        top.inputs,
        bottom.outcomes,
        top.dim_in * bottom.dim_in,
        top.dim_out * bottom.dim_out,
        kraus,
    )
