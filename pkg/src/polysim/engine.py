"""Classical simulation runners over vertex sets and update tables.

The vertex backend represents the quantum state as a distribution over
labelled polytope vertices and pushes it through stochastic update tables,
one per step; when every per-step table satisfies the simulation diagram the
exact pushforward reproduces the Born distribution.  Sampling draws
trajectories from the same chain, and the quasi-probability estimator
handles initial states outside the polytope by sampling vertices
proportionally to |r_alpha| and reweighting by sign(r_alpha) times the
decomposition's total variation, with the Hoeffding sample count
N = ceil((2 ||r||_1^2 / epsilon^2) ln(2 / delta)) for an (epsilon, delta)
guarantee (sample values range over [-||r||_1, ||r||_1]).

Randomness: shots are partitioned into chunks of 4096 consecutive shot
indices; chunk c draws from ``numpy.random.Philox`` keyed by (seed, c), so
results are reproducible and independent of how chunks are scheduled across
threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adaptive import AdaptiveComputation, LocalMeasureStep, MeasureStep
from .geometry import (
    UpdateMapTable,
    VertexSet,
    membership,
    scalar_vertices,
    stabilizer_vertices,
    to_coeffs,
    Decomposition,
    GeometryError,
)
from .tableau import StabilizerTableau
from .pauli import CliffordGate, PauliIndex

CHUNK = 4096


class EngineError(ValueError):
    """Backend misconfiguration or unsupported computation."""


# -- backend configuration ------------------------------------------------------


class LazyStepTable:
    """Update-table rows derived on demand for one computation step.

    Only the (vertex, history) pairs actually reached during propagation are
    solved for, which keeps large stage sets tractable.  Derived rows are
    cached and can be exported as a plain table.
    """

    def __init__(self, comp: AdaptiveComputation, index: int,
                 vset_in: VertexSet, vset_out: VertexSet, tol: float = 1e-9):
        self.comp = comp
        self.index = index
        self.vset_in = vset_in
        self.vset_out = vset_out
        self.tol = tol
        self.entries: dict = {}

    def moves(self, x: str, a: str):
        key = (x, a)
        if key not in self.entries:
            self.entries[key] = self._derive(x, a)
        return self.entries[key]

    def _derive(self, x: str, a: str):
        from .geometry import _exact_unit_sum  # shared normalization rule

        rho = self.vset_in.dense(x)
        moves = []
        for s, raw in self.comp._step_branches(self.index, a, rho):
            weight = float(np.trace(raw).real)
            if weight < -self.tol:
                raise EngineError(f"negative branch weight at ({x}, {a}, {s})")
            if weight <= self.tol:
                if float(np.max(np.abs(raw))) > self.tol:
                    raise EngineError(
                        f"trace-zero branch at ({x}, {a}, {s}) is not zero"
                    )
                continue
            res = membership(to_coeffs(raw / weight, tol=1e-7), self.vset_out)
            if not res.feasible:
                raise EngineError(
                    f"branch image at ({x}, {a}, {s}) left the output polytope"
                )
            for y, lam in res.weights.items():
                p = weight * float(lam)
                if p > 1e-12:
                    moves.append((y, s, p))
        probs = _exact_unit_sum([p for _, _, p in moves])
        return tuple((y, s, p) for (y, s, _), p in zip(moves, probs))

    def to_table(self) -> UpdateMapTable:
        return UpdateMapTable(self.entries)


@dataclass
class BackendConfig:
    """Vertex-backend data: stage vertex sets, initial weights, step tables."""

    stage_sets: tuple
    initial: tuple  # ((label, weight), ...) over stage_sets[0]
    tables: tuple  # one .moves(x, a) provider per step
    seed: int = 0

    def validate_initial(self, allow_negative: bool = False) -> None:
        total = math.fsum(w for _, w in self.initial)
        if abs(total - 1.0) > 1e-9:
            raise EngineError(f"initial weights sum to {total}, expected 1")
        if not allow_negative and any(w < -1e-12 for _, w in self.initial):
            raise EngineError(
                "initial distribution has negative weights; use estimate_quasi"
            )


def stabilizer_stage_sets(comp: AdaptiveComputation) -> tuple:
    """Stabilizer-state vertex sets matched to the register at every stage."""
    sets = []
    for k in range(len(comp.steps) + 1):
        m = len(comp.qubits_before(k))
        sets.append(stabilizer_vertices(m) if m else scalar_vertices())
    return tuple(sets)


def build_vertex_backend(
    comp: AdaptiveComputation,
    stage_sets=None,
    seed: int = 0,
    lazy: bool = True,
    allow_outside: bool = False,
) -> BackendConfig:
    """Assemble a vertex backend.

    The initial state must lie in the stage-0 hull unless ``allow_outside``
    is set, in which case the initial distribution is left empty and the
    caller supplies a signed decomposition to :func:`estimate_quasi`.
    """
    if stage_sets is None:
        stage_sets = stabilizer_stage_sets(comp)
    if len(stage_sets) != len(comp.steps) + 1:
        raise EngineError("need one vertex set per stage, including the last")
    res = membership(to_coeffs(comp.initial_state()), stage_sets[0])
    if not res.feasible and not allow_outside:
        raise EngineError(
            "initial state is outside the stage-0 polytope; "
            "decompose it and use estimate_quasi"
        )
    initial = tuple(sorted(res.weights.items())) if res.feasible else ()
    if lazy:
        tables = tuple(
            LazyStepTable(comp, i, stage_sets[i], stage_sets[i + 1])
            for i in range(len(comp.steps))
        )
    else:
        from .geometry import derive_update_map

        tables = tuple(
            derive_update_map(comp.step_instrument(i), stage_sets[i], stage_sets[i + 1])
            for i in range(len(comp.steps))
        )
    return BackendConfig(tuple(stage_sets), initial, tables, seed)


def verify_backend(comp: AdaptiveComputation, config: BackendConfig) -> None:
    """Check the simulation diagram of every fully materialized step table.

    Lazily derived tables are verified implicitly by construction; supplied
    tables must reproduce each step's branch images over the stage sets.
    """
    from .geometry import check_simulates

    for i, table in enumerate(config.tables):
        if isinstance(table, LazyStepTable):
            continue
        try:
            check_simulates(
                table,
                comp.step_instrument(i),
                config.stage_sets[i],
                config.stage_sets[i + 1],
            )
        except GeometryError as exc:
            raise EngineError(f"table {i} fails the simulation diagram: {exc}") from exc


# -- exact propagation -----------------------------------------------------------


def propagate_exact(comp: AdaptiveComputation, config: BackendConfig) -> dict:
    """Push the exact vertex distribution through the tables.

    Returns the probability of every outcome history; equals the dense Born
    distribution whenever the per-step simulation diagrams commute.
    """
    if len(config.tables) != len(comp.steps):
        raise EngineError("one update table per step is required")
    config.validate_initial()
    dist: dict[tuple[str, str], float] = {}
    for label, w in config.initial:
        if w > 0:
            dist[(label, "")] = dist.get((label, ""), 0.0) + w
    for table in config.tables:
        grown: dict[tuple[str, str], float] = {}
        for (x, hist), p in dist.items():
            for y, s, q in table.moves(x, hist):
                key = (y, hist + s)
                grown[key] = grown.get(key, 0.0) + p * q
        dist = grown
    out: dict[str, float] = {}
    for (_, hist), p in dist.items():
        out[hist] = out.get(hist, 0.0) + p
    total = math.fsum(out.values())
    if abs(total - 1.0) > 1e-9:
        raise EngineError(f"propagated mass {total} is not normalized")
    return out


# -- trajectory sampling ----------------------------------------------------------


class _Chain:
    """Flattened trajectory chain over reachable (vertex, history) states."""

    def __init__(self, comp, config, initial_labels):
        states = [(x, "") for x in initial_labels]
        self.stage_states = [states]
        self.transitions = []
        for table in config.tables:
            index = {}
            nxt_states = []
            rows_next, rows_prob = [], []
            for x, hist in states:
                moves = table.moves(x, hist)
                row_n, row_p = [], []
                for y, s, p in moves:
                    key = (y, hist + s)
                    if key not in index:
                        index[key] = len(nxt_states)
                        nxt_states.append(key)
                    row_n.append(index[key])
                    row_p.append(p)
                rows_next.append(row_n)
                rows_prob.append(row_p)
            width = max(len(r) for r in rows_next)
            nxt = np.zeros((len(states), width), dtype=np.int64)
            cum = np.ones((len(states), width), dtype=float)
            for i, (row_n, row_p) in enumerate(zip(rows_next, rows_prob)):
                nxt[i, : len(row_n)] = row_n
                if row_n:
                    nxt[i, len(row_n):] = row_n[-1]
                cum[i, : len(row_p)] = np.cumsum(row_p)
            self.transitions.append((nxt, cum))
            states = nxt_states
            self.stage_states.append(states)
        self.final_hists = [hist for _, hist in states]


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, chunk_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sample_terminal_counts(chain, init_cum, shots, seed, threads=None):
    """Run `shots` trajectories and return per-chunk results.

    Each chunk yields (initial state indices, terminal counts, terminal
    state indices); ``init_cum`` is the cumulative initial distribution.
    """
    nstates = len(chain.stage_states[-1])
    chunks = [(c, min(CHUNK, shots - c * CHUNK)) for c in range((shots + CHUNK - 1) // CHUNK)]

    def run(chunk):
        c, size = chunk
        rng = _chunk_rng(seed, c)
        u0 = rng.random(size)
        st = np.searchsorted(init_cum, u0, side="right")
        first = st.copy()
        for nxt, cum in chain.transitions:
            u = rng.random(size)
            pick = (u[:, None] > cum[st]).sum(axis=1)
            st = nxt[st, pick]
        return first, np.bincount(st, minlength=nstates), st

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]
    return results


def sample(comp: AdaptiveComputation, config: BackendConfig, shots: int,
           seed: int | None = None, threads: int | None = None) -> dict:
    """Seeded i.i.d. trajectories through the update tables, as counts."""
    if shots < 1:
        raise EngineError("shots must be positive")
    config.validate_initial()
    seed = config.seed if seed is None else seed
    labels = [x for x, _ in config.initial]
    probs = np.array([w for _, w in config.initial], dtype=float)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    chain = _Chain(comp, config, labels)
    init_cum = np.cumsum(probs)
    results = _sample_terminal_counts(chain, init_cum, shots, seed, threads)
    totals = np.zeros(len(chain.final_hists), dtype=np.int64)
    for _, counts, _ in results:
        totals += counts
    out: dict[str, int] = {}
    for hist, c in zip(chain.final_hists, totals):
        if c:
            out[hist] = out.get(hist, 0) + int(c)
    return dict(sorted(out.items()))


# -- quasi-probability estimation --------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    """Result of one quasi-probability estimation run."""

    event: str
    estimate: float
    epsilon: float
    delta: float
    samples: int
    negativity: float
    seed: int

    def to_json(self) -> dict:
        return {
            "event": self.event,
            "estimate": self.estimate,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "N": self.samples,
            "negativity": self.negativity,
            "seed": self.seed,
        }


def required_samples(negativity: float, epsilon: float, delta: float) -> int:
    """Hoeffding count for samples ranging over [-negativity, negativity]."""
    return math.ceil((2.0 * negativity**2 / epsilon**2) * math.log(2.0 / delta))


def _event_matcher(pattern: str, bits: int):
    if len(pattern) != bits or any(ch not in "01*" for ch in pattern):
        raise EngineError(
            f"event pattern {pattern!r} must have {bits} characters over 0/1/*"
        )

    def match(hist: str) -> bool:
        return all(p == "*" or p == h for p, h in zip(pattern, hist))

    return match


def estimate_quasi(
    comp: AdaptiveComputation,
    config: BackendConfig,
    decomposition: Decomposition,
    event: str,
    epsilon: float,
    delta: float,
    seed: int | None = None,
    threads: int | None = None,
) -> EstimateReport:
    """Estimate an outcome-event probability from a signed decomposition.

    Vertices are drawn with probability |r_alpha| / ||r||_1 and each
    trajectory contributes sign(r_alpha) ||r||_1 times the event indicator;
    the average is within epsilon of the Born probability with probability
    at least 1 - delta at the Hoeffding sample count.
    """
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise EngineError("epsilon and delta must lie in (0, 1)")
    try:
        decomposition.validate(to_coeffs(comp.initial_state()), config.stage_sets[0])
    except GeometryError as exc:
        raise EngineError(f"decomposition does not prepare the input: {exc}") from exc
    seed = config.seed if seed is None else seed
    negativity = float(sum(abs(float(w)) for w in decomposition.weights))
    n_samples = required_samples(negativity, epsilon, delta)
    labels = list(decomposition.labels)
    signs = np.array([1.0 if float(w) >= 0 else -1.0 for w in decomposition.weights])
    p_alpha = decomposition.sampling_distribution()
    chain = _Chain(comp, config, labels)
    matcher = _event_matcher(event, comp.total_outcome_bits())
    hit = np.array([matcher(h) for h in chain.final_hists], dtype=float)
    init_cum = np.cumsum(p_alpha)
    results = _sample_terminal_counts(chain, init_cum, n_samples, seed, threads)
    acc = 0.0
    for first, _, terminal in results:
        acc += float(np.sum(signs[first] * hit[terminal]))
    estimate = negativity * acc / n_samples
    if abs(estimate) > negativity + 1e-9:
        raise EngineError("estimate escaped its a priori range")
    return EstimateReport(event, estimate, epsilon, delta, n_samples, negativity, seed)


# -- stabilizer fast path -----------------------------------------------------------


def _initial_tableau(comp: AdaptiveComputation, seed=None) -> StabilizerTableau:
    if not isinstance(comp.resource, str) or comp.resource not in ("zeros", "plus_all"):
        raise EngineError("tableau backend requires a stabilizer-preparable resource")
    t = StabilizerTableau.init_zero(comp.n, seed)
    if comp.resource == "plus_all":
        for q in range(comp.n):
            t.apply_gate(CliffordGate("H", (q,)))
    for i, j in comp.graph:
        t.apply_gate(CliffordGate("CZ", (i, j)))
    return t


def run_tableau_fast(
    comp: AdaptiveComputation,
    shots: int,
    seed: int = 0,
    branch_cap: int = 4096,
) -> tuple[dict, dict]:
    """Counts and timing from the stabilizer tableau backend.

    Gates and non-destructive Pauli measurements only.  The branch tree is
    enumerated exactly (each random measurement splits with weight 1/2) and
    shots are allocated multinomially; beyond ``branch_cap`` branches the
    runner falls back to independent per-shot trajectories.
    """
    if shots < 1:
        raise EngineError("shots must be positive")
    for k, step in enumerate(comp.steps):
        if isinstance(step, LocalMeasureStep):
            raise EngineError(f"step {k}: destructive steps have no tableau path")
    timing = {"gates": 0.0, "gate_count": 0, "measurements": 0.0, "meas_count": 0}

    def walk():
        branches = [(_initial_tableau(comp), "", 1.0)]
        for index, step in enumerate(comp.steps):
            grown = []
            if not isinstance(step, MeasureStep):
                t0 = time.perf_counter()
                for tab, hist, p in branches:
                    tab.apply_gate(step.gate)
                timing["gates"] += time.perf_counter() - t0
                timing["gate_count"] += len(branches)
                grown = branches
            else:
                t0 = time.perf_counter()
                for tab, hist, p in branches:
                    op = step.cases.get(hist, step.cases.get("*"))
                    b, sign = op.index, op.sign_bit
                    if tab.in_stabilizer_group(b):
                        out = tab.measure(b, sign)
                        grown.append((tab, hist + str(out.outcome), p))
                    else:
                        other = tab.copy()
                        tab.measure(b, sign, forced=0)
                        other.measure(b, sign, forced=1)
                        grown.append((tab, hist + "0", p / 2))
                        grown.append((other, hist + "1", p / 2))
                timing["measurements"] += time.perf_counter() - t0
                timing["meas_count"] += len(branches)
            branches = grown
            if len(branches) > branch_cap:
                return None
        return branches

    branches = walk()
    counts: dict[str, int] = {}
    if branches is not None:
        hists = [hist for _, hist, _ in branches]
        probs = np.array([p for _, _, p in branches])
        rng = _chunk_rng(seed, 0)
        draws = rng.multinomial(shots, probs / probs.sum())
        for hist, c in zip(hists, draws):
            if c:
                counts[hist] = counts.get(hist, 0) + int(c)
    else:
        for shot in range(shots):
            rng = _chunk_rng(seed, shot + 1)
            tab = _initial_tableau(comp)
            hist = ""
            for step in comp.steps:
                if isinstance(step, MeasureStep):
                    op = step.cases.get(hist, step.cases.get("*"))
                    out = tab.measure(op.index, op.sign_bit, rng=rng)
                    hist += str(out.outcome)
                else:
                    tab.apply_gate(step.gate)
            counts[hist] = counts.get(hist, 0) + 1
    report = {
        "per_gate_seconds": timing["gates"] / max(timing["gate_count"], 1),
        "per_measurement_seconds": timing["measurements"] / max(timing["meas_count"], 1),
        "total_seconds": timing["gates"] + timing["measurements"],
    }
    return dict(sorted(counts.items())), report


def bench_tableau(n: int, gates: int = 100_000, measurements: int = 1_000,
                  seed: int = 0) -> dict:
    """Timing of a random gate/measurement workload at scale.

    Gates are uniform over the elementary kinds with uniform distinct
    qubits; measured indices are uniform nonzero Pauli points.
    """
    rng = np.random.default_rng(seed)
    kinds = ("H", "S", "X", "Y", "Z", "CNOT", "CZ")
    kind_idx = rng.integers(0, len(kinds), size=gates)
    q1 = rng.integers(0, n, size=gates)
    q2 = rng.integers(0, n, size=gates)
    gate_list = []
    for k, a, b in zip(kind_idx, q1, q2):
        kind = kinds[k]
        if kind in ("CNOT", "CZ"):
            second = int(b) if b != a else (int(b) + 1) % n
            gate_list.append(CliffordGate(kind, (int(a), second)))
        else:
            gate_list.append(CliffordGate(kind, (int(a),)))
    mask = (1 << n) - 1
    meas_list = []
    for _ in range(measurements):
        x = int.from_bytes(rng.bytes((n + 7) // 8), "little") & mask
        z = int.from_bytes(rng.bytes((n + 7) // 8), "little") & mask
        if x == 0 and z == 0:
            z = 1
        meas_list.append(PauliIndex(n, x, z))
    tab = StabilizerTableau.init_zero(n, seed=seed)
    t0 = time.perf_counter()
    for g in gate_list:
        tab.apply_gate(g)
    t1 = time.perf_counter()
    outcomes = 0
    for b in meas_list:
        outcomes += tab.measure(b).outcome
    t2 = time.perf_counter()
    return {
        "n": n,
        "gates": gates,
        "measurements": measurements,
        "gate_seconds": t1 - t0,
        "per_gate_seconds": (t1 - t0) / max(gates, 1),
        "measurement_seconds": t2 - t1,
        "per_measurement_seconds": (t2 - t1) / max(measurements, 1),
        "total_seconds": t2 - t0,
        "outcome_parity": outcomes & 1,
    }
