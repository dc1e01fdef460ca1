"""Dense two-phase primal simplex for small equality-form LPs.

Solves  min c.x  subject to  A x = b, x >= 0  on problems with at most a
few hundred variables, which is all the occupancy-measure LPs in this
package ever need.  Entering columns are chosen by Bland's rule (smallest
eligible index) so the method cannot cycle; a pivot-count guard catches
tolerance-induced stalls anyway.  Redundant equality rows — the occupancy
LP always carries one — are detected at the end of phase 1 and dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SimplexError


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    pivots: int


class _Tableau:
    """Simplex tableau with n structural columns, m artificials, and a rhs column."""

    def __init__(self, a: np.ndarray, b: np.ndarray, pivot_tol: float, max_pivots: int):
        m = a.shape[0]
        self.n = a.shape[1]
        self.rows = np.hstack([a, np.eye(m), b[:, None]])
        self.basis = list(range(self.n, self.n + m))
        self.pivot_tol = pivot_tol
        self.max_pivots = max_pivots
        self.pivots = 0

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def ncols(self) -> int:
        return self.rows.shape[1] - 1

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        cb = cost[self.basis]
        return cost - self.rows[:, : self.ncols].T @ cb

    def pivot(self, row: int, col: int) -> None:
        self.rows[row] /= self.rows[row, col]
        factors = self.rows[:, col].copy()
        factors[row] = 0.0
        self.rows -= np.outer(factors, self.rows[row])
        self.basis[row] = col
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise SimplexError(f"pivot guard tripped after {self.pivots} pivots")

    def run_phase(self, cost: np.ndarray, allowed: int) -> None:
        """Pivot to optimality for ``cost``, entering only columns < allowed.

        Bland's rule on both the entering column (smallest eligible index)
        and the leaving row (smallest basic index among ratio ties).
        """
        while True:
            r = self.reduced_costs(cost)
            entering = -1
            for j in range(allowed):
                if r[j] < -self.pivot_tol and j not in self.basis:
                    entering = j
                    break
            if entering < 0:
                return
            col = self.rows[:, entering]
            rhs = self.rows[:, -1]
            leave = -1
            best = np.inf
            for i in range(self.m):
                if col[i] <= self.pivot_tol:
                    continue
                ratio = rhs[i] / col[i]
                if ratio < best - 1e-15 or (
                    ratio < best + 1e-15 and leave >= 0 and self.basis[i] < self.basis[leave]
                ):
                    best = ratio
                    leave = i
            if leave < 0:
                raise SimplexError("LP is unbounded below")
            self.pivot(leave, entering)

    def drop_redundant_rows(self) -> None:
        """Pivot zero-level artificials out of the basis; drop rows where that
        is impossible (the constraint was redundant)."""
        keep = []
        for i in range(self.m):
            if self.basis[i] < self.n:
                keep.append(i)
                continue
            structural = np.flatnonzero(np.abs(self.rows[i, : self.n]) > self.pivot_tol)
            if structural.size:
                self.pivot(i, int(structural[0]))
                keep.append(i)
        if len(keep) < self.m:
            self.rows = self.rows[keep]
            self.basis = [self.basis[i] for i in keep]

    def solution(self) -> np.ndarray:
        x = np.zeros(self.n)
        for i, var in enumerate(self.basis):
            if var < self.n:
                x[var] = self.rows[i, -1]
        x[np.abs(x) < 1e-15] = 0.0
        return x


def solve_equality_lp(
    c: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    *,
    pivot_tol: float = 1e-7,
    max_pivots: int | None = None,
) -> SimplexResult:
    """Optimal basic feasible solution of min c.x s.t. a_eq x = b_eq, x >= 0.

    Raises SimplexError on infeasibility, unboundedness, or when the pivot
    guard trips.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_eq, dtype=float).copy()
    b = np.asarray(b_eq, dtype=float).copy()
    if a.ndim != 2 or a.shape != (b.size, c.size):
        raise ValueError(f"shape mismatch: A is {a.shape}, b has {b.size}, c has {c.size}")
    m, n = a.shape
    if max_pivots is None:
        max_pivots = 500 * (m + n + 10)

    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    tab = _Tableau(a, b, pivot_tol, max_pivots)

    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab.run_phase(phase1, allowed=n)
    infeas = float(phase1[tab.basis] @ tab.rows[:, -1])
    if infeas > max(pivot_tol, 1e-9) * max(1.0, float(np.abs(b).max())):
        raise SimplexError(f"LP infeasible (phase-1 objective {infeas:.3e})")
    tab.drop_redundant_rows()

    phase2 = np.concatenate([c, np.zeros(tab.ncols - n)])
    tab.run_phase(phase2, allowed=n)

    x = tab.solution()
    return SimplexResult(x=x, objective=float(c @ x), pivots=tab.pivots)
