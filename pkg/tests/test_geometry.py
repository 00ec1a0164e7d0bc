"""Tests for coefficient coordinates, LP membership/robustness, preservation,
update-map derivation, and dual vertex enumeration."""

import math

import numpy as np
import pytest

from polysim.geometry import (
    CoeffVector,
    GeometryError,
    UpdateMapTable,
    VertexSet,
    check_preservation,
    check_simulates,
    cnc_vertices,
    derive_update_map,
    dual_vertices,
    from_coeffs,
    local_stabilizer_vertices,
    membership,
    robustness,
    scalar_vertices,
    stabilizer_vertices,
    star_compose_tables,
    to_coeffs,
)
from polysim.oracle import (
    DenseInstrument,
    T_GATE,
    magic_t_state,
    pauli_measurement_instrument,
    unitary_instrument,
)
from polysim.pauli import PhasedPauli

SP1 = stabilizer_vertices(1)
CUBE = dual_vertices(SP1)


def random_density(rng, n):
    dim = 1 << n
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


class TestCoeffs:
    def test_maximally_mixed(self):
        v = to_coeffs(np.eye(2) / 2)
        np.testing.assert_allclose(v.coeffs, [0.5, 0, 0, 0], atol=1e-12)

    def test_magic_state_components(self):
        v = to_coeffs(magic_t_state())
        # code order I, Z, X, Y
        np.testing.assert_allclose(
            v.coeffs, [0.5, 0.0, 1 / (2 * np.sqrt(2)), 1 / (2 * np.sqrt(2))],
            atol=1e-12,
        )

    def test_round_trip_random(self, rng):
        for n in (1, 2, 3):
            for _ in range(5):
                rho = random_density(rng, n)
                np.testing.assert_allclose(
                    from_coeffs(to_coeffs(rho)), rho, atol=1e-12
                )

    def test_rejects_non_hermitian_and_traceless(self):
        with pytest.raises(GeometryError):
            to_coeffs(np.array([[0, 1], [0, 0]], dtype=complex))
        with pytest.raises(GeometryError):
            to_coeffs(np.eye(2, dtype=complex))

    def test_normalization_enforced(self):
        with pytest.raises(GeometryError):
            CoeffVector(1, np.array([0.4, 0, 0, 0]))


class TestVertexSets:
    def test_stabilizer_counts(self):
        assert len(SP1) == 6
        assert len(stabilizer_vertices(2)) == 60

    def test_local_equals_all_at_n1(self):
        loc = local_stabilizer_vertices(1)
        assert sorted(loc.labels) == sorted(SP1.labels)

    def test_local_count_n2(self):
        assert len(local_stabilizer_vertices(2)) == 36

    def test_cnc_vertices_match_cube(self):
        got = cnc_vertices(1)
        assert len(got) == 8
        want = sorted(map(tuple, np.round(CUBE.matrix, 12)))
        assert sorted(map(tuple, np.round(got.matrix, 12))) == want

    def test_json_round_trip(self):
        again = VertexSet.from_json(SP1.to_json())
        assert again.labels == SP1.labels
        np.testing.assert_allclose(again.matrix, SP1.matrix)

    def test_duplicates_rejected(self):
        with pytest.raises(GeometryError):
            VertexSet(1, ["a", "b"], np.array([[0.5, 0, 0, 0.5], [0.5, 0, 0, 0.5]]))


class TestMembership:
    def test_vertex_is_member(self):
        res = membership(SP1.vector("+Z"), SP1)
        assert res.feasible
        assert res.weights["+Z"] > 0.99

    def test_magic_outside_octahedron_inside_cube(self):
        rho_t = to_coeffs(magic_t_state())
        assert not membership(rho_t, SP1).feasible
        assert membership(rho_t, CUBE).feasible

    def test_witness_reproduces_target(self, rng):
        for _ in range(10):
            w = rng.dirichlet(np.ones(6))
            target = CoeffVector(1, w @ SP1.matrix)
            res = membership(target, SP1)
            assert res.feasible
            recon = sum(res.weights[s] * SP1.row(s) for s in res.weights)
            np.testing.assert_allclose(recon, target.coeffs, atol=1e-9)

    def test_certificate_separates(self):
        rho_t = to_coeffs(magic_t_state())
        res = membership(rho_t, SP1)
        y = res.certificate
        b = np.concatenate([rho_t.coeffs, [1.0]])
        a = np.vstack([SP1.matrix.T, np.ones(6)])
        assert y @ b > 1e-10
        assert np.all(y @ a <= 1e-9)

    def test_exact_mode(self):
        res = membership(SP1.vector("-Y"), SP1, exact=True)
        assert res.feasible
        assert sum(res.weights.values()) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(GeometryError):
            membership(CoeffVector(2, np.eye(16)[0] * 0.25), SP1)


class TestRobustness:
    def test_magic_state_sqrt2(self):
        value, decomp = robustness(to_coeffs(magic_t_state()), SP1)
        assert abs(value - math.sqrt(2)) < 1e-7
        decomp.validate(to_coeffs(magic_t_state()), SP1)

    def test_members_have_value_one(self, rng):
        for _ in range(5):
            w = rng.dirichlet(np.ones(6))
            target = CoeffVector(1, w @ SP1.matrix)
            value, _ = robustness(target, SP1)
            assert abs(value - 1.0) < 1e-7

    def test_stabilizer_states_exact_one(self):
        for label in SP1.labels:
            value, _ = robustness(SP1.vector(label), SP1, exact=True)
            assert value == 1

    def test_maximally_mixed(self):
        value, _ = robustness(to_coeffs(np.eye(2) / 2), SP1, exact=True)
        assert value == 1

    def test_outside_affine_span(self):
        only_z = VertexSet(1, ["+Z", "-Z"], SP1.matrix[:2])
        with pytest.raises(GeometryError):
            robustness(to_coeffs(magic_t_state()), only_z)

    def test_cube_value_sqrt3_for_corner_state(self):
        # the pure state along (1,1,1)/sqrt3 has octahedron robustness sqrt3
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        y = np.array([[0, -1j], [1j, 0]])
        z = np.diag([1.0, -1.0])
        rho = 0.5 * (np.eye(2) + (x + y + z) / math.sqrt(3))
        value, _ = robustness(to_coeffs(rho), SP1)
        assert abs(value - math.sqrt(3)) < 1e-7


class TestPreservation:
    @pytest.mark.parametrize("letter", ["X", "Y", "Z"])
    def test_pauli_measurements_preserve_octahedron(self, letter):
        instr = pauli_measurement_instrument(PhasedPauli.from_string(letter))
        assert check_preservation(instr, SP1, SP1).passed

    @pytest.mark.parametrize("letter", ["X", "Y", "Z"])
    def test_pauli_measurements_preserve_cube(self, letter):
        instr = pauli_measurement_instrument(PhasedPauli.from_string(letter))
        assert check_preservation(instr, CUBE, CUBE).passed

    @pytest.mark.parametrize("letter", ["X", "Y", "Z"])
    def test_destructive_local_measurements(self, letter):
        instr = pauli_measurement_instrument(
            PhasedPauli.from_string(letter), destructive=True
        )
        lp1 = dual_vertices(local_stabilizer_vertices(1))
        assert check_preservation(instr, lp1, scalar_vertices()).passed

    def test_t_gate_fails_with_plus_witness(self):
        rep = check_preservation(unitary_instrument(T_GATE), SP1, SP1)
        assert not rep.passed
        witnesses = {v.vertex for v in rep.violations}
        assert "+X" in witnesses
        assert all(v.kind == "outside-hull" for v in rep.violations)
        assert all(v.certificate is not None for v in rep.violations)

    def test_dimension_mismatch(self):
        instr = pauli_measurement_instrument(PhasedPauli.from_string("ZZ"))
        with pytest.raises(GeometryError):
            check_preservation(instr, SP1, SP1)


class TestUpdateMaps:
    def test_z_vertex_point_mass(self):
        instr = pauli_measurement_instrument(PhasedPauli.from_string("Z"))
        table = derive_update_map(instr, SP1, SP1)
        assert table.moves("+Z", "") == (("+Z", "0", 1.0),)

    def test_z_on_plus_splits_evenly(self):
        instr = pauli_measurement_instrument(PhasedPauli.from_string("Z"))
        table = derive_update_map(instr, SP1, SP1)
        moves = dict(((y, s), p) for y, s, p in table.moves("+X", ""))
        assert abs(moves[("+Z", "0")] - 0.5) < 1e-9
        assert abs(moves[("-Z", "1")] - 0.5) < 1e-9

    def test_z_on_cube_corner_reproduces_plus_z_mixture(self):
        instr = pauli_measurement_instrument(PhasedPauli.from_string("Z"))
        table = derive_update_map(instr, CUBE, CUBE)
        corner = next(
            s for s in CUBE.labels
            if np.allclose(CUBE.row(s), [0.5, 0.5, 0.5, 0.5])
        )
        moves = table.moves(corner, "")
        assert all(s == "0" for _, s, _ in moves)
        recon = sum(p * CUBE.dense(y) for y, _, p in moves)
        np.testing.assert_allclose(recon, (np.eye(2) + np.diag([1, -1])) / 2, atol=1e-9)

    @pytest.mark.parametrize("letter", ["X", "Y", "Z"])
    @pytest.mark.parametrize("vset", [SP1, CUBE], ids=["octahedron", "cube"])
    def test_reproduction_identity_and_stochasticity(self, letter, vset):
        instr = pauli_measurement_instrument(PhasedPauli.from_string(letter))
        table = derive_update_map(instr, vset, vset)
        table.validate(tol=0.0)
        assert check_simulates(table, instr, vset, vset) <= 1e-9

    def test_preservation_failure_raises(self):
        with pytest.raises(GeometryError):
            derive_update_map(unitary_instrument(T_GATE), SP1, SP1)

    def test_json_round_trip(self):
        instr = pauli_measurement_instrument(PhasedPauli.from_string("Y"))
        table = derive_update_map(instr, SP1, SP1)
        again = UpdateMapTable.from_json(table.to_json())
        assert again.entries == table.entries

    def test_missing_entry_reported(self):
        table = UpdateMapTable({("x", ""): [("y", "0", 1.0)]})
        with pytest.raises(GeometryError):
            table.moves("other", "")


class TestStarComposition:
    def test_two_measurements_compose(self):
        first = derive_update_map(
            pauli_measurement_instrument(PhasedPauli.from_string("Z")), SP1, SP1
        )
        second_instr = DenseInstrument(
            ("0", "1"),
            ("0", "1"),
            2,
            2,
            {
                (a, s): pauli_measurement_instrument(
                    PhasedPauli.from_string("X")
                ).kraus[("", s)]
                for a in "01"
                for s in "01"
            },
        )
        second = derive_update_map(second_instr, SP1, SP1)
        comp = star_compose_tables(first, second)
        comp.validate(tol=0.0)
        # composite instrument via Kraus products
        kraus = {}
        for a in [""]:
            for s in "01":
                for r in "01":
                    kraus[(a, s + r)] = [
                        k2 @ k1
                        for k1 in pauli_measurement_instrument(
                            PhasedPauli.from_string("Z")
                        ).kraus[("", s)]
                        for k2 in second_instr.kraus[(s, r)]
                    ]
        combined = DenseInstrument(("",), ("00", "01", "10", "11"), 2, 2, kraus)
        assert check_simulates(comp, combined, SP1, SP1) <= 1e-9

    def test_repeated_measurement_repeats_outcome(self):
        z = pauli_measurement_instrument(PhasedPauli.from_string("Z"))
        first = derive_update_map(z, SP1, SP1)
        adaptive_z = DenseInstrument(
            ("0", "1"), ("0", "1"), 2, 2,
            {(a, s): z.kraus[("", s)] for a in "01" for s in "01"},
        )
        second = derive_update_map(adaptive_z, SP1, SP1)
        comp = star_compose_tables(first, second)
        for x in SP1.labels:
            for _, sr, p in comp.moves(x, ""):
                if p > 1e-12:
                    assert sr[0] == sr[1]


class TestDualVertices:
    def test_cube_corners(self):
        assert len(CUBE) == 8
        expect = {tuple(v) for v in CUBE.matrix}
        for sx in (0.5, -0.5):
            for sy in (0.5, -0.5):
                for sz in (0.5, -0.5):
                    assert (0.5, sz, sx, sy) in expect or (0.5, sx, sy, sz) in expect

    def test_duality_involution(self):
        octa = dual_vertices(CUBE)
        assert sorted(map(tuple, np.round(octa.matrix, 12))) == sorted(
            map(tuple, np.round(SP1.matrix, 12))
        )

    def test_local_dual_equals_stabilizer_dual_at_n1(self):
        lp1 = dual_vertices(local_stabilizer_vertices(1))
        assert sorted(map(tuple, np.round(lp1.matrix, 12))) == sorted(
            map(tuple, np.round(CUBE.matrix, 12))
        )

    def test_every_state_in_dual(self, rng):
        for _ in range(20):
            rho = to_coeffs(random_density(rng, 1))
            assert membership(rho, CUBE).feasible

    def test_large_n_needs_flag(self):
        with pytest.raises(GeometryError):
            dual_vertices(stabilizer_vertices(2))


class TestScalarStage:
    def test_membership_trivial(self):
        res = membership(CoeffVector(0, np.array([1.0])), scalar_vertices())
        assert res.feasible

    def test_destructive_table(self):
        instr = pauli_measurement_instrument(
            PhasedPauli.from_string("X"), destructive=True
        )
        lp1 = dual_vertices(local_stabilizer_vertices(1))
        table = derive_update_map(instr, lp1, scalar_vertices())
        table.validate(tol=0.0)
        assert check_simulates(table, instr, lp1, scalar_vertices()) <= 1e-9
