"""Dense bounded-variable primal simplex.

Solves ``min c @ x`` subject to ``row_lo <= A @ x <= row_hi`` and
``lo <= x <= hi``.  Each row gets a logical variable ``s = A @ x`` carrying
the row bounds, so every column is a bounded variable and nonbasic columns
sit at one of their bounds.  Phase 1 uses one artificial per row whose
activity starts outside its range.

Pricing is Dantzig's rule; after a run of degenerate pivots it switches to
Bland's rule (lowest eligible index, lowest leaving index on ratio ties)
until progress resumes, which keeps the method finite and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-10
_DEGENERATE_SWITCH = 25


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray | None
    objective: float | None
    iterations: int


class _Tableau:
    def __init__(self, T, xB, basis, x, lb, ub):
        self.T = T
        self.xB = xB
        self.basis = basis
        self.x = x
        self.lb = lb
        self.ub = ub
        self.is_basic = np.zeros(T.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0

    def run(self, cost: np.ndarray, max_iter: int) -> str:
        T, lb, ub = self.T, self.lb, self.ub
        d = cost - cost[self.basis] @ T
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                return "iteration-limit"
            xN = self.x
            at_lower = np.isclose(xN, lb, rtol=0, atol=_FEAS_TOL) & np.isfinite(lb)
            at_upper = np.isclose(xN, ub, rtol=0, atol=_FEAS_TOL) & np.isfinite(ub)
            movable = ~self.is_basic & (ub - lb > _FEAS_TOL)
            can_up = movable & ~at_upper & (d < -_COST_TOL)
            can_down = movable & ~at_lower & (d > _COST_TOL)
            eligible = np.flatnonzero(can_up | can_down)
            if eligible.size == 0:
                return "optimal"
            if degenerate >= _DEGENERATE_SWITCH:
                q = int(eligible[0])
            else:
                scores = np.abs(d[eligible])
                q = int(eligible[int(np.argmax(scores))])
            direction = 1.0 if can_up[q] else -1.0

            alpha = direction * T[:, q]
            xB = self.xB
            lbB = lb[self.basis]
            ubB = ub[self.basis]
            ratios = np.full(alpha.shape, np.inf)
            dec = alpha > _PIVOT_TOL
            inc = alpha < -_PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = (xB[dec] - lbB[dec]) / alpha[dec]
                ratios[inc] = (ubB[inc] - xB[inc]) / (-alpha[inc])
            ratios = np.where(np.isnan(ratios), np.inf, np.maximum(ratios, 0.0))
            step_basic = float(ratios.min()) if ratios.size else np.inf
            step_own = float(ub[q] - lb[q])
            if not np.isfinite(step_basic) and not np.isfinite(step_own):
                return "unbounded"

            self.iterations += 1
            if step_own <= step_basic:
                step = step_own
                self.x[q] = ub[q] if direction > 0 else lb[q]
                self.xB = xB - direction * step * T[:, q]
                degenerate = 0 if step > _FEAS_TOL else degenerate + 1
                continue

            step = step_basic
            ties = np.flatnonzero(ratios <= step + 1e-12)
            r = int(ties[np.argmin(self.basis[ties])])
            leaving = int(self.basis[r])
            new_xq = self.x[q] + direction * step
            self.xB = xB - direction * step * T[:, q]
            # leaving variable sits at the bound it ran into
            self.x[leaving] = lbB[r] if alpha[r] > 0 else ubB[r]
            self._pivot(r, q)
            d = d - d[q] * T[r, :]
            self.xB[r] = new_xq
            self.x[q] = new_xq
            degenerate = 0 if step > _FEAS_TOL else degenerate + 1

    def _pivot(self, r: int, q: int) -> None:
        T = self.T
        pivot_row = T[r, :] / T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        cols = np.flatnonzero(pivot_row)
        # clearing tableaus are sparse; touch only the affected submatrix
        if rows.size * 2 < T.shape[0] or cols.size * 2 < T.shape[1]:
            T[np.ix_(rows, cols)] -= np.outer(col[rows], pivot_row[cols])
        else:
            T -= np.outer(col, pivot_row)
        T[r, :] = pivot_row
        self.is_basic[self.basis[r]] = False
        self.basis[r] = q
        self.is_basic[q] = True


def _initial_value(lo: float, hi: float) -> float:
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


def solve_lp(
    c,
    A,
    row_lo,
    row_hi,
    lo,
    hi,
    max_iter: int | None = None,
) -> LpResult:
    """Minimise ``c @ x`` over ``row_lo <= A x <= row_hi``, ``lo <= x <= hi``."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    n = c.size
    if A.size == 0:
        A = A.reshape(0, n)
    m = A.shape[0]
    row_lo = np.asarray(row_lo, dtype=float).reshape(m)
    row_hi = np.asarray(row_hi, dtype=float).reshape(m)
    lo = np.asarray(lo, dtype=float).reshape(n)
    hi = np.asarray(hi, dtype=float).reshape(n)
    if np.any(lo > hi + _FEAS_TOL) or np.any(row_lo > row_hi + _FEAS_TOL):
        return LpResult("infeasible", None, None, 0)
    if max_iter is None:
        max_iter = 50 * (m + n) + 100

    x0 = np.array([_initial_value(a, b) for a, b in zip(lo, hi)])
    activity = A @ x0 if m else np.zeros(0)
    s0 = np.clip(activity, row_lo, row_hi)
    s0 = np.where(np.isfinite(s0), s0, 0.0)
    needs_art = np.abs(activity - s0) > _FEAS_TOL
    art_rows = np.flatnonzero(needs_art)
    k = art_rows.size

    # columns: x (n) | s (m) | artificials (k)
    N = n + m + k
    full = np.zeros((m, N))
    full[:, :n] = A
    full[:, n:n + m] = -np.eye(m)
    signs = np.sign(s0[art_rows] - activity[art_rows])
    full[art_rows, n + m + np.arange(k)] = signs
    lb = np.concatenate([lo, row_lo, np.zeros(k)])
    ub = np.concatenate([hi, row_hi, np.full(k, np.inf)])

    basis = np.empty(m, dtype=int)
    xB = np.empty(m)
    x = np.concatenate([x0, s0, np.zeros(k)])
    for i in range(m):
        basis[i] = n + i
    basis[art_rows] = n + m + np.arange(k)
    # basis matrix is diagonal (+-1), so its inverse is its transpose
    diag = full[np.arange(m), basis]
    T = full / diag[:, None]
    xB = np.where(needs_art, np.abs(s0 - activity), activity)
    x[basis] = xB
    tab = _Tableau(T, xB, basis, x, lb, ub)

    if k:
        phase1 = np.zeros(N)
        phase1[n + m:] = 1.0
        status = tab.run(phase1, max_iter)
        if status == "iteration-limit":
            return LpResult(status, None, None, tab.iterations)
        infeas = float(np.sum(tab.x[n + m:][~tab.is_basic[n + m:]])) + float(
            np.sum(tab.xB[tab.basis >= n + m])
        )
        if infeas > 1e-7 * max(1.0, float(np.abs(full).max())):
            return LpResult("infeasible", None, None, tab.iterations)
        tab.ub[n + m:] = 0.0
        tab.x[n + m:] = 0.0
        for r in np.flatnonzero(tab.basis >= n + m):
            row = np.abs(tab.T[r, : n + m]) * ~tab.is_basic[: n + m]
            j = int(np.argmax(row))
            if row[j] > 1e-7:
                tab._pivot(int(r), j)
        tab.xB = _basic_values(full, tab)

    phase2 = np.concatenate([c, np.zeros(m + k)])
    status = tab.run(phase2, max_iter)
    if status != "optimal":
        return LpResult(status, None, None, tab.iterations)
    xB = _basic_values(full, tab)
    sol = tab.x.copy()
    sol[tab.basis] = xB
    xs = sol[:n]
    return LpResult("optimal", xs, float(c @ xs), tab.iterations)


def _basic_values(full: np.ndarray, tab: _Tableau) -> np.ndarray:
    """Recompute basic values from the original columns to shed drift."""
    nonbasic = ~tab.is_basic
    rhs = -(full[:, nonbasic] @ tab.x[nonbasic])
    B = full[:, tab.basis]
    try:
        return np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError:
        return tab.xB
