"""Command-line surface: parse inputs, dispatch verbs, emit JSON reports.

Verbs: simulate, estimate, robustness, enumerate, check-preservation,
derive-updates, bench.  Every report embeds the tool version, the seed, and
a sha256 of each input file, and is byte-identical across runs for the same
inputs and seed (bench reports contain wall-clock timings and are exempt).

Exit codes: 0 success; 1 verification failure (a preservation check found
violations); 2 malformed input or arguments.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .adaptive import AdaptiveComputation, AdaptiveError, LocalMeasureStep
from .cnc import CncError, enumerate_maximal_cnc
from .engine import (
    EngineError,
    bench_tableau,
    build_vertex_backend,
    estimate_quasi,
    propagate_exact,
    run_tableau_fast,
    sample,
    stabilizer_stage_sets,
    verify_backend,
)
from .geometry import (
    CoeffVector,
    GeometryError,
    UpdateMapTable,
    VertexSet,
    check_preservation,
    derive_update_map,
    dual_vertices,
    local_stabilizer_vertices,
    robustness,
    stabilizer_vertices,
    to_coeffs,
)
from .oracle import OracleError, operator_from_json
from .pauli import PauliError
from .tableau import TableauError

INPUT_ERRORS = (
    AdaptiveError,
    CncError,
    EngineError,
    GeometryError,
    OracleError,
    PauliError,
    TableauError,
    ValueError,
    OSError,
    json.JSONDecodeError,
)


class CliError(ValueError):
    pass


class VerificationFailure(RuntimeError):
    """A supplied artifact failed its consistency check (exit code 1)."""


def _read_json(path: str):
    with open(path, "rb") as fh:
        return json.loads(fh.read().decode("utf-8"))


def _hash_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return "sha256:" + digest.hexdigest()


def parse_circuit(path: str) -> AdaptiveComputation:
    """Load and validate a circuit file."""
    return AdaptiveComputation.from_json(_read_json(path))


def _load_state(path: str) -> CoeffVector:
    data = _read_json(path)
    if "coeffs" in data:
        return CoeffVector(int(data["n"]), np.asarray(data["coeffs"], dtype=float))
    return to_coeffs(operator_from_json(data))


def _load_vertex_files(paths) -> list[VertexSet]:
    return [VertexSet.from_json(_read_json(p)) for p in paths]


def _load_tables(path: str) -> list[UpdateMapTable]:
    data = _read_json(path)
    if "tables" in data:
        return [UpdateMapTable.from_json(entry) for entry in data["tables"]]
    return [UpdateMapTable.from_json(data)]


def _stage_sets_for(comp: AdaptiveComputation, vertex_files) -> tuple:
    """Per-stage vertex sets from zero, one, or N+1 user files."""
    stages = len(comp.steps) + 1
    if not vertex_files:
        return stabilizer_stage_sets(comp)
    sets = _load_vertex_files(vertex_files)
    if len(sets) == 1:
        if any(isinstance(s, LocalMeasureStep) for s in comp.steps):
            raise CliError(
                "destructive circuits need one vertex set per stage"
            )
        return tuple(sets) * stages
    if len(sets) != stages:
        raise CliError(f"expected 1 or {stages} vertex sets, got {len(sets)}")
    return tuple(sets)


def _envelope(args, payload: dict, file_flags: dict) -> dict:
    report = {
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "inputs": {
            flag: _hash_file(path)
            for flag, path in file_flags.items()
            if path is not None
        },
    }
    report.update(payload)
    return report


def _emit(args, report: dict) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- verbs ----------------------------------------------------------------------


def _cmd_simulate(args) -> tuple[dict, int]:
    comp = parse_circuit(args.circuit)
    file_flags = {"circuit": args.circuit}
    if args.backend == "oracle":
        result = comp.evaluate_born()
        if args.shots:
            rng = np.random.Generator(
                np.random.Philox(key=np.array([args.seed, 0], dtype=np.uint64))
            )
            hists = sorted(result.probabilities)
            probs = np.array([result.probabilities[h] for h in hists])
            draws = rng.multinomial(args.shots, probs / probs.sum())
            payload = {"counts": {h: int(c) for h, c in zip(hists, draws) if c}}
        else:
            payload = {"distribution": dict(sorted(result.probabilities.items()))}
    elif args.backend == "tableau":
        counts, timing = run_tableau_fast(comp, args.shots or 1024, seed=args.seed)
        payload = {"counts": counts}
    else:  # vertex
        stage_sets = _stage_sets_for(comp, args.vertices)
        config = build_vertex_backend(comp, stage_sets=stage_sets, seed=args.seed)
        if args.tables:
            loaded = _load_tables(args.tables)
            if len(loaded) != len(comp.steps):
                raise CliError(
                    f"expected {len(comp.steps)} tables, got {len(loaded)}"
                )
            config.tables = tuple(loaded)
            file_flags["tables"] = args.tables
            try:
                verify_backend(comp, config)
            except EngineError as exc:
                raise VerificationFailure(str(exc)) from exc
        if args.shots:
            payload = {
                "counts": sample(
                    comp, config, args.shots, seed=args.seed, threads=args.threads
                )
            }
        else:
            dist = propagate_exact(comp, config)
            payload = {"distribution": dict(sorted(dist.items()))}
        for i, path in enumerate(args.vertices or []):
            file_flags[f"vertices[{i}]"] = path
    return _envelope(args, payload, file_flags), 0


def _cmd_estimate(args) -> tuple[dict, int]:
    comp = parse_circuit(args.circuit)
    stage_sets = _stage_sets_for(comp, args.vertices)
    config = build_vertex_backend(
        comp, stage_sets=stage_sets, seed=args.seed, allow_outside=True
    )
    value, decomposition = robustness(to_coeffs(comp.initial_state()), stage_sets[0])
    report = estimate_quasi(
        comp,
        config,
        decomposition,
        args.event,
        args.epsilon,
        args.delta,
        seed=args.seed,
        threads=args.threads,
    )
    file_flags = {"circuit": args.circuit}
    for i, path in enumerate(args.vertices or []):
        file_flags[f"vertices[{i}]"] = path
    return _envelope(args, {"estimate": report.to_json()}, file_flags), 0


def _cmd_robustness(args) -> tuple[dict, int]:
    target = _load_state(args.state)
    vset = _load_vertex_files(args.vertices)[0]
    value, decomposition = robustness(target, vset, exact=args.exact)
    payload = {
        "value": float(value),
        "negativity": float(decomposition.negativity),
        "weights": {
            s: float(w) for s, w in zip(decomposition.labels, decomposition.weights)
        },
        "exact": bool(args.exact),
    }
    if args.exact:
        payload["value_rational"] = str(value)
    return _envelope(
        args, payload, {"state": args.state, "vertices": args.vertices[0]}
    ), 0


def _cmd_enumerate(args) -> tuple[dict, int]:
    if args.what == "stabilizer":
        payload = stabilizer_vertices(args.n).to_json()
    elif args.what == "local":
        payload = local_stabilizer_vertices(args.n).to_json()
    elif args.what == "cnc":
        payload = {"labels": [lab.to_json() for lab in enumerate_maximal_cnc(args.n)]}
    elif args.what == "dual":
        if args.vertices:
            base = _load_vertex_files(args.vertices)[0]
        else:
            base = stabilizer_vertices(args.n)
        payload = dual_vertices(base, allow_large=args.allow_large).to_json()
    else:
        raise CliError(f"unknown enumeration target {args.what!r}")
    flags = {}
    if args.what == "dual" and args.vertices:
        flags["vertices"] = args.vertices[0]
    return _envelope(args, payload, flags), 0


def _cmd_check_preservation(args) -> tuple[dict, int]:
    comp = parse_circuit(args.circuit)
    stage_sets = _stage_sets_for(comp, args.vertices)
    steps_report = []
    ok = True
    for i in range(len(comp.steps)):
        rep = check_preservation(
            comp.step_instrument(i), stage_sets[i], stage_sets[i + 1]
        )
        ok = ok and rep.passed
        steps_report.append(
            {
                "step": i,
                "passed": rep.passed,
                "checks": rep.checks,
                "violations": [
                    {
                        "input": v.input,
                        "vertex": v.vertex,
                        "outcome": v.outcome,
                        "kind": v.kind,
                        "detail": v.detail,
                    }
                    for v in rep.violations
                ],
            }
        )
    file_flags = {"circuit": args.circuit}
    for i, path in enumerate(args.vertices or []):
        file_flags[f"vertices[{i}]"] = path
    return _envelope(args, {"passed": ok, "steps": steps_report}, file_flags), (
        0 if ok else 1
    )


def _cmd_derive_updates(args) -> tuple[dict, int]:
    comp = parse_circuit(args.circuit)
    stage_sets = _stage_sets_for(comp, args.vertices)
    tables = [
        derive_update_map(comp.step_instrument(i), stage_sets[i], stage_sets[i + 1])
        for i in range(len(comp.steps))
    ]
    payload = {"tables": [t.to_json() for t in tables]}
    file_flags = {"circuit": args.circuit}
    for i, path in enumerate(args.vertices or []):
        file_flags[f"vertices[{i}]"] = path
    return _envelope(args, payload, file_flags), 0


def _cmd_bench(args) -> tuple[dict, int]:
    report = bench_tableau(
        args.n, gates=args.gates, measurements=args.measurements, seed=args.seed
    )
    return _envelope(args, {"timing": report}, {}), 0


HANDLERS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "robustness": _cmd_robustness,
    "enumerate": _cmd_enumerate,
    "check-preservation": _cmd_check_preservation,
    "derive-updates": _cmd_derive_updates,
    "bench": _cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polysim",
        description="Polyhedral classical simulators for quantum circuits",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, seed=True, out=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("simulate", help="run a circuit on a chosen backend")
    p.add_argument("--circuit", required=True)
    p.add_argument("--backend", choices=("oracle", "tableau", "vertex"),
                   default="oracle")
    p.add_argument("--shots", type=int, default=0,
                   help="sample counts instead of the exact distribution")
    p.add_argument("--vertices", nargs="+", default=None,
                   help="vertex-set files for the vertex backend")
    p.add_argument("--tables", default=None,
                   help="update-table file for the vertex backend")
    p.add_argument("--threads", type=int, default=os.cpu_count())
    common(p)

    p = sub.add_parser("estimate", help="quasi-probability estimation of an event")
    p.add_argument("--circuit", required=True)
    p.add_argument("--vertices", nargs="+", default=None)
    p.add_argument("--event", required=True,
                   help="outcome pattern over 0/1/* matching the history bits")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    common(p)

    p = sub.add_parser("robustness", help="minimal l1 decomposition over vertices")
    p.add_argument("--state", required=True)
    p.add_argument("--vertices", nargs="+", required=True)
    p.add_argument("--exact", action="store_true",
                   help="exact rational arithmetic (rational inputs)")
    common(p)

    p = sub.add_parser("enumerate", help="enumerate vertex families")
    p.add_argument("--what", choices=("stabilizer", "local", "cnc", "dual"),
                   required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--vertices", nargs="+", default=None,
                   help="base vertex set for --what dual")
    p.add_argument("--allow-large", action="store_true",
                   help="permit dual enumeration beyond one qubit")
    common(p)

    p = sub.add_parser("check-preservation",
                       help="verify each circuit step maps hull into hull")
    p.add_argument("--circuit", required=True)
    p.add_argument("--vertices", nargs="+", default=None)
    common(p)

    p = sub.add_parser("derive-updates", help="derive stochastic update tables")
    p.add_argument("--circuit", required=True)
    p.add_argument("--vertices", nargs="+", default=None)
    common(p)

    p = sub.add_parser("bench", help="time a large random stabilizer workload")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gates", type=int, default=100_000)
    p.add_argument("--measurements", type=int, default=1_000)
    common(p)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, code = HANDLERS[args.verb](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(args, report)
    return code


if __name__ == "__main__":
    sys.exit(main())
