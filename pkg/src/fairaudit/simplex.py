"""Dense two-phase revised simplex for small standard-form LPs.

Solves max c'x subject to Ax = b, x >= 0. The audit problems solved
here have only a handful of rows (the basis stays tiny even when the
variable count is K^2), so each iteration refactorizes the basis with
dense solves instead of maintaining an updated inverse. Exact vertex
solutions and dual vectors matter more than raw speed.

Pricing is Dantzig (most positive reduced cost, lowest index on ties).
After a stall of degenerate pivots the pricing switches to Bland's
rule, which guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

PIVOT_TOL = 1e-9
STALL_LIMIT = 60

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


@dataclass(eq=False)
class LpResult:
    status: str
    x: np.ndarray
    value: float
    y: np.ndarray  # row duals c_B' B^-1, indexed by the original rows
    basis: np.ndarray
    iterations: int


def _iterate(c, A, b, basis, *, max_iter, trace):
    """Run simplex pivots from a feasible basis. Returns (status, basis, iters)."""
    m = A.shape[0]
    basis = np.array(basis, dtype=np.int64)
    bland = False
    stall = 0

    for it in range(max_iter):
        B = A[:, basis]
        try:
            xB = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError:
            raise SolverError("singular basis matrix", trace=trace[-8:]) from None

        reduced = c - y @ A
        reduced[basis] = 0.0

        if bland:
            candidates = np.flatnonzero(reduced > PIVOT_TOL)
            if candidates.size == 0:
                return OPTIMAL, basis, it
            enter = int(candidates[0])
        else:
            enter = int(np.argmax(reduced))
            if reduced[enter] <= PIVOT_TOL:
                return OPTIMAL, basis, it

        d = np.linalg.solve(B, A[:, enter])
        positive = d > PIVOT_TOL
        if not positive.any():
            return UNBOUNDED, basis, it

        ratios = np.full(m, np.inf)
        ratios[positive] = xB[positive] / d[positive]
        theta = ratios.min()
        ties = np.flatnonzero(ratios <= theta + PIVOT_TOL)
        # among ties, drop the basic variable with the smallest index
        leave = int(ties[np.argmin(basis[ties])])

        trace.append((it, int(basis[leave]), enter, float(theta)))
        basis[leave] = enter

        if theta * reduced[enter] > PIVOT_TOL:
            stall = 0
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True

    raise SolverError(f"simplex did not converge in {max_iter} iterations", trace=trace[-8:])


def _phase_one(A, b, max_iter, trace):
    """Find a feasible basis, dropping rows proven redundant.

    Returns (A, b, basis, kept_rows) or None when infeasible.
    """
    m, n = A.shape
    A1 = A.copy()
    b1 = b.copy()
    neg = b1 < 0
    A1[neg] *= -1.0
    b1[neg] *= -1.0
    A1 = np.hstack([A1, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), -np.ones(m)])
    basis = np.arange(n, n + m, dtype=np.int64)

    status, basis, _ = _iterate(c1, A1, b1, basis, max_iter=max_iter, trace=trace)
    if status != OPTIMAL:
        raise SolverError("phase 1 terminated abnormally", trace=trace[-8:])
    xB = np.linalg.solve(A1[:, basis], b1)
    if c1[basis] @ xB < -1e-7:
        return None

    keep = np.ones(m, dtype=bool)
    for pos in np.flatnonzero(basis >= n):
        # basic artificial at zero: pivot it out, else the row is redundant
        B = A1[:, basis]
        e = np.zeros(m)
        e[pos] = 1.0
        binv_row = np.linalg.solve(B.T, e)
        row = binv_row @ A1[:, :n]
        row[basis[basis < n]] = 0.0
        pivots = np.flatnonzero(np.abs(row) > 1e-8)
        if pivots.size:
            basis[pos] = int(pivots[0])
        else:
            keep[pos] = False

    kept_rows = np.flatnonzero(keep)
    return A1[np.ix_(kept_rows, np.arange(n))], b1[kept_rows], basis[keep], kept_rows, neg


def solve_standard_form(c, A, b, *, basis=None, max_iter=None) -> LpResult:
    """Maximize c'x over Ax = b, x >= 0.

    ``basis`` may supply a known feasible starting basis (m column
    indices); otherwise phase 1 constructs one. The returned duals are
    reported against the original rows (zero for rows phase 1 proved
    redundant, negated for rows it had to flip).
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m0, n = A.shape
    if max_iter is None:
        max_iter = 200 * (m0 + n) + 2000
    trace: list = []

    kept_rows = np.arange(m0)
    flipped = np.zeros(m0, dtype=bool)
    if basis is None:
        phase1 = _phase_one(A, b, max_iter, trace)
        if phase1 is None:
            return LpResult(INFEASIBLE, np.zeros(n), np.nan, np.full(m0, np.nan), np.array([]), 0)
        A, b, basis, kept_rows, flipped = phase1
        if (basis >= n).any():
            raise SolverError("could not eliminate artificial variables", trace=trace[-8:])

    basis = np.asarray(basis, dtype=np.int64)
    status, basis, iters = _iterate(c, A, b, basis, max_iter=max_iter, trace=trace)
    B = A[:, basis]
    xB = np.linalg.solve(B, b)
    y_local = np.linalg.solve(B.T, c[basis])
    x = np.zeros(n)
    x[basis] = xB

    y = np.zeros(m0)
    y[kept_rows] = y_local
    y[flipped] *= -1.0

    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, x, np.inf, y, basis, iters)
    return LpResult(OPTIMAL, x, float(c @ x), y, basis, iters)
