"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS line when its criterion holds (run with -s to see
them); any failure shows up as an ordinary pytest failure.
"""

import math
import time

import numpy as np
import pytest

from polysim.adaptive import AdaptiveComputation, build_local_pauli_model, build_pauli_model
from polysim.cnc import cnc_operator, enumerate_maximal_cnc, value_assignments
from polysim.engine import (
    bench_tableau,
    build_vertex_backend,
    estimate_quasi,
    propagate_exact,
    required_samples,
    sample,
)
from polysim.geometry import (
    check_preservation,
    check_simulates,
    derive_update_map,
    dual_vertices,
    local_stabilizer_vertices,
    robustness,
    scalar_vertices,
    stabilizer_vertices,
    star_compose_tables,
    to_coeffs,
)
from polysim.oracle import (
    T_GATE,
    gate_unitary,
    ket_state,
    magic_t_state,
    pauli_measurement_instrument,
    unitary_instrument,
    zero_state,
)
from polysim.pauli import PauliIndex, PhasedPauli, all_indices, materialize
from polysim.tableau import (
    StabilizerTableau,
    enumerate_stabilizer_states,
    maximal_isotropic_subspaces,
)

from conftest import random_adaptive_circuit, random_gate, random_index

SP1 = stabilizer_vertices(1)
CUBE = dual_vertices(SP1)  # the one-qubit universal-sampler vertex set


def report(criterion, text):
    print(f"[acceptance {criterion}] PASS - {text}")


def test_01_gottesman_knill_correctness():
    """200 seeded random Clifford circuits match the dense oracle."""
    rng = np.random.default_rng(20250811)
    t_start = time.perf_counter()
    circuits = 0
    for trial in range(200):
        n = int(rng.integers(1, 5))
        num_gates = int(rng.integers(1, 51))
        num_meas = int(rng.integers(1, 11))
        ops = ["g"] * num_gates + ["m"] * num_meas
        rng.shuffle(ops)
        tab = StabilizerTableau.init_zero(n)
        dense = zero_state(n)
        for op in ops:
            if op == "g":
                gate = random_gate(rng, n)
                tab.apply_gate(gate)
                u = gate_unitary(gate, n)
                dense = u @ dense @ u.conj().T
            else:
                b = random_index(rng, n)
                sign = int(rng.integers(2))
                obs = (-1.0) ** sign * materialize(PhasedPauli(0, b))
                probs = {
                    s: float(np.trace(
                        dense @ (np.eye(1 << n) + (-1) ** s * obs) / 2
                    ).real)
                    for s in (0, 1)
                }
                deterministic = max(probs.values()) > 1 - 1e-9
                assert tab.in_stabilizer_group(b) == deterministic
                choices = [s for s in (0, 1) if probs[s] > 1e-9]
                forced = choices[rng.integers(len(choices))]
                out = tab.measure(b, sign=sign, forced=forced)
                assert out.outcome == forced
                assert out.deterministic == deterministic
                assert abs(out.probability - probs[forced]) < 1e-9
                proj = (np.eye(1 << n) + (-1.0) ** forced * obs) / 2
                dense = proj @ dense @ proj / probs[forced]
                np.testing.assert_allclose(tab.to_state(), dense, atol=1e-9)
        np.testing.assert_allclose(tab.to_state(), dense, atol=1e-9)
        circuits += 1
    elapsed = time.perf_counter() - t_start
    assert circuits == 200
    assert elapsed < 60.0
    report(1, f"200 random Clifford circuits match the oracle in {elapsed:.1f}s")


def test_02_gottesman_knill_performance():
    """n=1000 workload under 5 s; doubling n costs at most 10x."""
    small = bench_tableau(1000, gates=100_000, measurements=1_000, seed=11)
    assert small["total_seconds"] < 5.0
    large = bench_tableau(2000, gates=100_000, measurements=1_000, seed=11)
    ratio = large["total_seconds"] / small["total_seconds"]
    assert ratio <= 10.0
    report(
        2,
        f"n=1000 in {small['total_seconds']:.2f}s, doubling ratio {ratio:.2f}",
    )


def test_03_enumeration_regressions():
    """Stabilizer-state counts and the n=1 phase-space points."""
    for n, want in ((1, 6), (2, 60), (3, 1080)):
        states = enumerate_stabilizer_states(n)
        formula = 2**n * int(np.prod([2**k + 1 for k in range(1, n + 1)]))
        assert len(states) == want == formula
        assert len({t.canonical_key() for t in states}) == want
    labels = enumerate_maximal_cnc(1)
    assert len(labels) == 8
    ops = [cnc_operator(lab) for lab in labels]
    duals = [CUBE.dense(s) for s in CUBE.labels]
    for op in ops:
        assert any(np.max(np.abs(op - d)) <= 1e-12 for d in duals)
    for d in duals:
        assert any(np.max(np.abs(op - d)) <= 1e-12 for op in ops)
    report(3, "counts 6/60/1080 and 8 phase-space points matching dual vertices")


def test_04_robustness_values():
    """sqrt(2) for the magic state; exactly 1 for stabilizer states."""
    value, decomp = robustness(to_coeffs(magic_t_state()), SP1)
    assert abs(value - math.sqrt(2)) < 1e-7
    decomp.validate(to_coeffs(magic_t_state()), SP1, tol=1e-7)
    for label in SP1.labels:
        exact_value, _ = robustness(SP1.vector(label), SP1, exact=True)
        assert exact_value == 1
    report(4, "robustness(magic)=sqrt2 within 1e-7; stabilizer states exactly 1")


def test_05_preservation_theorems():
    """Pauli and local Pauli measurements preserve; the T gate does not."""
    for letter in "XYZ":
        instr = pauli_measurement_instrument(PhasedPauli.from_string(letter))
        assert check_preservation(instr, CUBE, CUBE).passed
    lp1 = dual_vertices(local_stabilizer_vertices(1))
    for letter in "XYZ":
        instr = pauli_measurement_instrument(
            PhasedPauli.from_string(letter), destructive=True
        )
        assert check_preservation(instr, lp1, scalar_vertices()).passed
    rep = check_preservation(unitary_instrument(T_GATE), SP1, SP1)
    assert not rep.passed
    plus = [v for v in rep.violations if v.vertex == "+X"]
    assert plus and plus[0].kind == "outside-hull"
    image = unitary_instrument(T_GATE).apply_cp("", "", SP1.dense("+X"))
    np.testing.assert_allclose(image, magic_t_state(), atol=1e-12)
    report(5, "X/Y/Z preserve (P1,P1) and (LP1,LP0); T fails with witness |+>")


def _criterion6_corpus():
    rng = np.random.default_rng(60606)
    corpus = []
    for _ in range(10):  # 1-qubit adaptive circuits, magic resource on the cube
        spec = random_adaptive_circuit(rng, 1, "pauli", measurements=3)
        spec["resource"] = "magic_t_all"
        comp = AdaptiveComputation.from_json(spec)
        corpus.append((comp, (CUBE,) * (len(comp.steps) + 1)))
    sp2 = stabilizer_vertices(2)
    for _ in range(10):  # 2-qubit Clifford circuits on stabilizer stages
        spec = random_adaptive_circuit(rng, 2, "clifford", measurements=3, gates=5)
        comp = AdaptiveComputation.from_json(spec)
        corpus.append((comp, (sp2,) * (len(comp.steps) + 1)))
    return corpus


def test_06_update_maps_constructive():
    """Derived tables reproduce instruments; exact propagation matches Born."""
    for letter in "ZXY":
        instr = pauli_measurement_instrument(PhasedPauli.from_string(letter))
        for vset in (SP1, CUBE):
            table = derive_update_map(instr, vset, vset)
            table.validate(tol=0.0)  # row stochastic, exactly
            assert check_simulates(table, instr, vset, vset) <= 1e-9
    checked = 0
    for comp, stages in _criterion6_corpus():
        config = build_vertex_backend(comp, stage_sets=stages)
        dist = propagate_exact(comp, config)
        born = comp.evaluate_born().probabilities
        keys = set(dist) | set(born)
        assert all(
            abs(dist.get(k, 0.0) - born.get(k, 0.0)) <= 1e-9 for k in keys
        )
        checked += 1
    assert checked == 20
    report(6, "Z/X/Y tables exact on both vertex sets; 20 circuits match Born")


def test_07_composition_of_tables():
    """Star-composed tables simulate star-composed instruments."""
    checked = 0
    for comp, stages in _criterion6_corpus():
        if len(comp.steps) < 2:
            continue
        two_steps = comp.steps[:2]
        sliced = AdaptiveComputation(
            comp.model, comp.n, comp.resource, two_steps, comp.graph
        )
        first = derive_update_map(sliced.step_instrument(0), stages[0], stages[1])
        second = derive_update_map(sliced.step_instrument(1), stages[1], stages[2])
        composed = star_compose_tables(first, second)
        composed.validate(tol=0.0)
        from polysim.adaptive import star_compose

        combined = star_compose(sliced.step_instrument(0), sliced.step_instrument(1))
        assert check_simulates(composed, combined, stages[0], stages[2]) <= 1e-9
        checked += 1
    assert checked == 20
    report(7, f"star-composed tables simulate composites on {checked} circuits")


def test_08_quasi_probability_estimator():
    """20 runs at epsilon=0.01, delta=0.05: at least 19 within epsilon."""
    comp = build_pauli_model(
        {"model": "pauli", "n": 1, "resource": "magic_t_all",
         "steps": [{"type": "measure", "cases": {"": "X"}}]}
    )
    value, decomp = robustness(to_coeffs(magic_t_state()), SP1)
    config = build_vertex_backend(comp, stage_sets=(SP1, SP1), allow_outside=True)
    p_true = 0.5 * (1 + 1 / math.sqrt(2))
    expected_n = math.ceil((2 * 2 / 0.01**2) * math.log(2 / 0.05))
    hits = 0
    for run in range(20):
        rep = estimate_quasi(
            comp, config, decomp, "0", 0.01, 0.05, seed=8800 + run
        )
        assert rep.samples == expected_n == required_samples(
            rep.negativity, 0.01, 0.05
        )
        hits += abs(rep.estimate - p_true) <= 0.01
    assert hits >= 19
    report(8, f"{hits}/20 estimates within 0.01 of {p_true:.6f} at N={expected_n}")


def test_09_local_model_end_to_end():
    """Two-qubit cluster: oracle, vertex backend, and sampling all agree."""
    comp = build_local_pauli_model(
        {"model": "local_pauli", "n": 2, "resource": "plus_all",
         "graph": [[0, 1]],
         "steps": [{"type": "local_measure", "qubit": 0, "cases": {"": "X"}}]}
    )
    born = comp.evaluate_born()
    assert born.probabilities == {
        "0": pytest.approx(0.5, abs=1e-9), "1": pytest.approx(0.5, abs=1e-9)
    }
    for s, rho in born.post_states.items():
        np.testing.assert_allclose(rho, ket_state(s), atol=1e-9)
    config = build_vertex_backend(comp)
    dist = propagate_exact(comp, config)
    assert all(abs(dist[k] - born.probabilities[k]) <= 1e-9 for k in dist)
    shots = 10_000
    counts = sample(comp, config, shots, seed=99)
    tv = 0.5 * sum(
        abs(counts.get(k, 0) / shots - born.probabilities.get(k, 0.0))
        for k in set(counts) | set(born.probabilities)
    )
    assert tv < 0.02
    report(9, f"cluster circuit uniform with |s><s| residuals, sampling TV={tv:.4f}")


def test_10_contextuality_witness():
    """The full two-qubit index set is contextual; isotropic subspaces are not."""
    assert value_assignments(list(all_indices(2))) == []
    subspaces = [(0, [PauliIndex.zero(2)])]
    for code in range(1, 16):  # every nonzero point spans a line
        subspaces.append((1, [PauliIndex.zero(2), PauliIndex.from_code(2, code)]))
    for basis in maximal_isotropic_subspaces(2):
        span = {0}
        for code in basis:
            span |= {p ^ code for p in span}
        subspaces.append((2, [PauliIndex.from_code(2, c) for c in sorted(span)]))
    assert len(subspaces) == 1 + 15 + 15
    for dim, points in subspaces:
        assert len(value_assignments(points)) == 2**dim
    report(10, "empty assignment set on E2; 2^k assignments on isotropics")
