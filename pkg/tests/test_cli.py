"""Tests for the command-line surface: verbs, reports, exit codes."""

import json
import math

import pytest

from polysim.cli import main, parse_circuit
from polysim.geometry import VertexSet, stabilizer_vertices
from polysim.oracle import magic_t_state, operator_to_json

BELL = {
    "model": "clifford", "n": 2, "resource": "zeros",
    "steps": [
        {"type": "gate", "name": "H", "qubits": [0]},
        {"type": "gate", "name": "CNOT", "qubits": [0, 1]},
        {"type": "measure", "cases": {"": "ZI"}},
        {"type": "measure", "cases": {"*": "IZ"}},
    ],
}

MAGIC = {
    "model": "pauli", "n": 1, "resource": "magic_t_all",
    "steps": [{"type": "measure", "cases": {"": "X"}}],
}


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, data in [
        ("bell", BELL),
        ("magic", MAGIC),
        ("sp1", stabilizer_vertices(1).to_json()),
        ("rho_t", operator_to_json(magic_t_state())),
    ]:
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(data))
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


class TestSimulate:
    def test_oracle_distribution(self, capsys, files):
        code, report = run(capsys, "simulate", "--circuit", files["bell"])
        assert code == 0
        assert report["distribution"] == {
            "00": pytest.approx(0.5), "11": pytest.approx(0.5)
        }
        assert report["version"] and "circuit" in report["inputs"]

    def test_tableau_counts_parity(self, capsys, files):
        code, report = run(
            capsys, "simulate", "--circuit", files["bell"],
            "--backend", "tableau", "--shots", "1000", "--seed", "7",
        )
        assert code == 0
        assert set(report["counts"]) <= {"00", "11"}
        assert sum(report["counts"].values()) == 1000

    def test_vertex_backend_exact(self, capsys, files):
        code, report = run(
            capsys, "simulate", "--circuit", files["bell"], "--backend", "vertex"
        )
        assert code == 0
        assert report["distribution"] == {"00": 0.5, "11": 0.5}

    def test_byte_identical_reports(self, capsys, files):
        argv = ("simulate", "--circuit", files["bell"], "--backend", "vertex",
                "--shots", "400", "--seed", "9")
        main(list(argv))
        first = capsys.readouterr().out
        main(list(argv))
        second = capsys.readouterr().out
        assert first == second

    def test_supplied_tables_round_trip(self, capsys, files, tmp_path):
        tables = tmp_path / "tables.json"
        code = main(["derive-updates", "--circuit", files["bell"],
                     "--out", str(tables)])
        assert code == 0
        capsys.readouterr()
        code, report = run(
            capsys, "simulate", "--circuit", files["bell"], "--backend", "vertex",
            "--tables", str(tables),
        )
        assert code == 0
        assert report["distribution"] == {"00": 0.5, "11": 0.5}

    def test_inconsistent_tables_fail_verification(self, capsys, files, tmp_path):
        tables = tmp_path / "tables.json"
        main(["derive-updates", "--circuit", files["bell"], "--out", str(tables)])
        capsys.readouterr()
        data = json.loads(tables.read_text())
        entry = data["tables"][2]["entries"][0]
        labels = {
            m["y"] for t in data["tables"] for e in t["entries"] for m in e["moves"]
        }
        entry["moves"][0]["y"] = next(
            s for s in sorted(labels) if s != entry["moves"][0]["y"]
        )
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(data))
        code = main(["simulate", "--circuit", files["bell"], "--backend", "vertex",
                     "--tables", str(bad)])
        assert code == 1
        assert "simulation diagram" in capsys.readouterr().err


class TestEstimate:
    def test_magic_event(self, capsys, files):
        code, report = run(
            capsys, "estimate", "--circuit", files["magic"], "--event", "0",
            "--epsilon", "0.02", "--delta", "0.05", "--seed", "5",
        )
        assert code == 0
        est = report["estimate"]
        assert abs(est["estimate"] - 0.5 * (1 + 1 / math.sqrt(2))) < 0.02
        assert est["N"] == math.ceil(
            (2 * est["negativity"] ** 2 / 0.02**2) * math.log(2 / 0.05)
        )

    def test_bad_event_pattern(self, capsys, files):
        code = main(["estimate", "--circuit", files["magic"], "--event", "01",
                     "--epsilon", "0.1", "--delta", "0.1"])
        assert code == 2


class TestRobustness:
    def test_magic_value(self, capsys, files):
        code, report = run(
            capsys, "robustness", "--state", files["rho_t"],
            "--vertices", files["sp1"],
        )
        assert code == 0
        assert abs(report["value"] - 1.4142136) < 1e-6

    def test_exact_mode_reports_rational(self, capsys, files, tmp_path):
        state = tmp_path / "zero.json"
        state.write_text(json.dumps({"n": 1, "coeffs": [0.5, 0.5, 0, 0]}))
        code, report = run(
            capsys, "robustness", "--state", str(state),
            "--vertices", files["sp1"], "--exact",
        )
        assert code == 0
        assert report["value"] == 1.0
        assert report["value_rational"] == "1"


class TestEnumerate:
    def test_cnc_labels(self, capsys, files):
        code, report = run(capsys, "enumerate", "--what", "cnc", "--n", "1")
        assert code == 0
        assert len(report["labels"]) == 8

    def test_stabilizer_counts(self, capsys, files):
        code, report = run(capsys, "enumerate", "--what", "stabilizer", "--n", "2")
        assert code == 0
        assert len(report["vertices"]) == 60

    def test_dual_default_base(self, capsys, files):
        code, report = run(capsys, "enumerate", "--what", "dual", "--n", "1")
        assert code == 0
        assert len(report["vertices"]) == 8

    def test_dual_needs_flag_beyond_n1(self, capsys, files):
        code = main(["enumerate", "--what", "dual", "--n", "2"])
        assert code == 2


class TestCheckPreservation:
    def test_bell_passes(self, capsys, files):
        code, report = run(capsys, "check-preservation", "--circuit", files["bell"])
        assert code == 0
        assert report["passed"] is True

    def test_violation_exits_one(self, capsys, files, tmp_path):
        narrow = VertexSet(1, ["+Z", "-Z"], stabilizer_vertices(1).matrix[:2])
        vfile = tmp_path / "narrow.json"
        vfile.write_text(json.dumps(narrow.to_json()))
        circ = tmp_path / "x.json"
        circ.write_text(json.dumps({
            "model": "clifford", "n": 1, "resource": "zeros",
            "steps": [{"type": "measure", "cases": {"": "X"}}],
        }))
        code, report = run(
            capsys, "check-preservation", "--circuit", str(circ),
            "--vertices", str(vfile),
        )
        assert code == 1
        assert report["passed"] is False
        assert report["steps"][0]["violations"]


class TestParseAndErrors:
    def test_parse_minimal(self, tmp_path):
        p = tmp_path / "min.json"
        p.write_text(json.dumps({
            "model": "clifford", "n": 1,
            "steps": [{"type": "measure", "cases": {"": "Z"}}],
        }))
        comp = parse_circuit(str(p))
        assert len(comp.steps) == 1

    def test_out_of_range_rejected_with_step_index(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({
            "model": "clifford", "n": 1,
            "steps": [{"type": "gate", "name": "H", "qubits": [1]}],
        }))
        code = main(["simulate", "--circuit", str(p)])
        assert code == 2
        assert "step 0" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["simulate", "--circuit", "/nonexistent.json"]) == 2

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        assert main(["simulate", "--circuit", str(p)]) == 2

    def test_out_file(self, tmp_path, files, capsys):
        out = tmp_path / "report.json"
        code = main(["simulate", "--circuit", files["bell"], "--out", str(out)])
        assert code == 0
        written = json.loads(out.read_text())["distribution"]
        assert written == {"00": pytest.approx(0.5), "11": pytest.approx(0.5)}
        assert capsys.readouterr().out == ""


class TestBench:
    def test_small_bench(self, capsys):
        code, report = run(capsys, "bench", "--n", "64", "--gates", "500",
                           "--measurements", "10")
        assert code == 0
        assert report["timing"]["gates"] == 500
