"""Self-contained dense linear programming for the polytope machinery.

Solves min c.x subject to Ax = b, x >= 0 with a two-phase tableau simplex.
Pivoting uses the most-negative-reduced-cost rule for speed and switches to
Bland's rule (smallest-index entering column, smallest-index ratio ties)
whenever a run of degenerate pivots is detected, so termination is
guaranteed without the slowdown pure Bland pivoting shows on degenerate
vertex-decomposition problems.  Problems here are desk scale: tens of rows,
up to a few thousand columns.

Two arithmetic modes share the same code path:

* float mode: float64 with feasibility/optimality tolerance 1e-9;
* exact mode: ``fractions.Fraction`` entries in object arrays with exact
  comparisons, for certificates on rational data (binary floats convert
  to rationals losslessly).

On infeasibility the phase-1 dual vector y is returned; it certifies
infeasibility through y.b > 0 together with y.A_j <= 0 for every column j.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

EPS = 1e-9
_MAX_PIVOTS = 50_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Solver failure: bad shapes or pivot limit exceeded."""


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: object = None
    dual: np.ndarray | None = None  # infeasibility certificate (phase 1)


def _as_exact(a: np.ndarray) -> np.ndarray:
    out = np.empty(a.shape, dtype=object)
    flat_in, flat_out = a.reshape(-1), out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def solve_lp(a, b, c, exact: bool = False) -> LpResult:
    """Minimize c.x over Ax = b, x >= 0."""
    if exact:
        a = _as_exact(np.asarray(a, dtype=object))
        b = _as_exact(np.asarray(b, dtype=object))
        c = _as_exact(np.asarray(c, dtype=object))
        zero, one, eps = Fraction(0), Fraction(1), Fraction(0)
    else:
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        c = np.array(c, dtype=float)
        zero, one, eps = 0.0, 1.0, EPS
    if a.ndim != 2 or b.shape != (a.shape[0],) or c.shape != (a.shape[1],):
        raise LpError("inconsistent LP shapes")
    m, n = a.shape

    # flip rows so the right-hand side is nonnegative; remember the signs so
    # the phase-1 dual can be reported against the caller's row orientation
    flip = np.full(m, one, dtype=a.dtype)
    for i in range(m):
        if b[i] < zero:
            a[i] = -a[i]
            b[i] = -b[i]
            flip[i] = -one

    # tableau columns: [original | artificial | rhs]
    ncols = n + m
    t = np.zeros((m, ncols + 1), dtype=a.dtype) if not exact else np.full(
        (m, ncols + 1), zero, dtype=object
    )
    t[:, :n] = a
    for i in range(m):
        t[i, n + i] = one
    t[:, -1] = b
    basis = [n + i for i in range(m)]

    phase1_cost = np.concatenate(
        [np.full(n, zero, dtype=t.dtype), np.full(m, one, dtype=t.dtype)]
    )

    def reduced_costs(cost):
        cb = cost[basis]
        return cost[:ncols] - cb @ t[:, :ncols]

    def pivot(row, col):
        t[row] = t[row] / t[row, col]
        factors = t[:, col].copy()
        factors[row] = zero
        t[:] -= np.outer(factors, t[row])
        basis[row] = col

    stall_limit = 40

    def choose_leave_float(enter):
        col = t[:, enter]
        mask = col > eps
        if not mask.any():
            return -1
        ratios = np.full(m, np.inf)
        ratios[mask] = t[mask, -1] / col[mask]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin)
        return int(min(ties, key=lambda i: basis[i]))

    def choose_leave_exact(enter):
        leave, best, best_basis = -1, None, None
        for i in range(m):
            tij = t[i, enter]
            if tij > eps:
                ratio = t[i, -1] / tij
                if best is None or ratio < best or (
                    ratio == best and basis[i] < best_basis
                ):
                    leave, best, best_basis = i, ratio, basis[i]
        return leave

    def run_simplex(cost, limit):
        stall = 0
        for _ in range(_MAX_PIVOTS):
            r = reduced_costs(cost)[:limit]
            if exact or stall >= stall_limit:
                # Bland's rule: guaranteed to escape degenerate cycles
                neg = np.flatnonzero(np.asarray(r < -eps, dtype=bool))
                enter = int(neg[0]) if neg.size else -1
            else:
                enter = int(np.argmin(r)) if limit else -1
                if enter >= 0 and not r[enter] < -eps:
                    enter = -1
            if enter < 0:
                return True
            leave = choose_leave_exact(enter) if exact else choose_leave_float(enter)
            if leave < 0:
                return False
            stall = stall + 1 if t[leave, -1] <= eps else 0
            pivot(leave, enter)
        raise LpError("pivot limit exceeded")

    # phase 1: minimize the artificial mass
    if not run_simplex(phase1_cost, ncols):
        raise LpError("phase-1 subproblem unbounded")
    infeas = phase1_cost[basis] @ t[:, -1]
    if infeas > (eps if exact else 1e-7):
        dual = (phase1_cost[basis] @ t[:, n:ncols]) * flip
        return LpResult(INFEASIBLE, objective=infeas, dual=np.asarray(dual))

    # drive remaining artificials out of the basis; drop redundant rows
    keep = list(range(m))
    for i in range(m):
        if basis[i] < n:
            continue
        col = next((j for j in range(n) if abs(t[i, j]) > eps), None)
        if col is None:
            keep.remove(i)
        else:
            pivot(i, col)
    if len(keep) != m:
        t = t[keep]
        basis = [basis[i] for i in keep]
        m = len(keep)

    # phase 2 over the original columns only
    phase2_cost = np.concatenate([c, np.full(ncols - n, zero, dtype=t.dtype)])
    if not run_simplex(phase2_cost, n):
        return LpResult(UNBOUNDED)

    x = np.full(n, zero, dtype=t.dtype)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = t[i, -1]
    if not exact:
        x = np.where(np.abs(x) < EPS, 0.0, x)
    return LpResult(OPTIMAL, x=x, objective=c @ x)
