"""Fixed-assignment subproblem, per-block cover search, result assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import (
    BlockAssignment,
    ClearingResult,
    Member,
    SolverStats,
    block_reliability,
    stack_reliability,
)
from .model import ProblemInstance
from .simplex import solve_lp


@dataclass(frozen=True)
class LpSubproblem:
    """Block-volume LP once the accepted sets ``S_b`` are fixed.

    With nonnegative prices an accepted offer never supplies more than its
    block needs, so ``q_ib = q_b`` and only the block volumes remain::

        min  sum_b c_b q_b          c_b = sum_{i in S_b} P_i
        s.t. sum_b q_b >= Q
             q_b >= lower_b
             sum_{b : i in S_b} q_b <= V_i   for every offer i
    """

    members: tuple[tuple[int, ...], ...]
    costs: tuple[float, ...]
    lower: tuple[float, ...]
    target: float
    capacity_rows: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def from_sets(cls, inst: ProblemInstance, sets: Sequence[Sequence[int]]) -> "LpSubproblem":
        members = tuple(tuple(sorted(s)) for s in sets)
        costs = tuple(math.fsum(inst.offers[i].price for i in s) for s in members)
        lower = tuple(inst.block_lower_volume(b) for b in range(len(members)))
        rows = []
        for i, o in enumerate(inst.offers):
            blocks = tuple(b for b, s in enumerate(members) if i in s)
            if blocks:
                rows.append((blocks, o.volume))
        return cls(members, costs, lower, inst.requirement.target_volume, tuple(rows))

    def solve(self) -> tuple[float, np.ndarray] | None:
        """Return ``(cost, q)`` or ``None`` when infeasible."""
        k = len(self.members)
        A = np.zeros((1 + len(self.capacity_rows), k))
        row_lo = np.empty(A.shape[0])
        row_hi = np.empty(A.shape[0])
        A[0, :] = 1.0
        row_lo[0], row_hi[0] = self.target, np.inf
        for r, (blocks, cap) in enumerate(self.capacity_rows, start=1):
            A[r, list(blocks)] = 1.0
            row_lo[r], row_hi[r] = -np.inf, cap
        res = solve_lp(self.costs, A, row_lo, row_hi, self.lower, np.full(k, np.inf))
        if res.status != "optimal":
            return None
        q = np.maximum(res.x, np.asarray(self.lower))
        return float(np.dot(self.costs, q)), q


def canonical_key(sets: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    """Block-order-free identity of an acceptance pattern."""
    return tuple(sorted(tuple(sorted(s)) for s in sets))


def assemble_result(
    inst: ProblemInstance,
    sets: Sequence[Sequence[int]],
    q: Sequence[float],
    stats: SolverStats,
    formulation: str | None = None,
    notes: Sequence[str] = (),
) -> ClearingResult:
    """Build a :class:`ClearingResult` with blocks in canonical order."""
    order = sorted(range(len(sets)), key=lambda b: tuple(sorted(sets[b])))
    assignments = []
    for new_id, b in enumerate(order, start=1):
        qb = float(q[b])
        members = tuple(
            Member(inst.offers[i].id, True, qb, inst.offers[i].price, inst.offers[i].reliability)
            for i in sorted(sets[b])
        )
        phi = block_reliability(m.reliability for m in members)
        assignments.append(BlockAssignment(new_id, members, qb, phi))
    cost = math.fsum(m.quantity * m.price for a in assignments for m in a.members)
    volume = math.fsum(m.quantity for a in assignments for m in a.members)
    reliability = stack_reliability(a.block_reliability for a in assignments)
    return ClearingResult(
        assignments=tuple(assignments),
        total_cost=cost,
        total_volume=volume,
        achieved_reliability=reliability,
        formulation=formulation or inst.formulation.value,
        stats=stats,
        notes=tuple(notes) + inst.warnings,
    )


def empty_result(inst: ProblemInstance, stats: SolverStats, formulation: str | None = None) -> ClearingResult:
    return ClearingResult((), 0.0, 0.0, 1.0, formulation or inst.formulation.value, stats, notes=inst.warnings)


def infeasible_result(
    inst: ProblemInstance, stats: SolverStats, formulation: str | None = None, note: str = ""
) -> ClearingResult:
    notes = (note,) if note else ()
    return ClearingResult(
        (), math.inf, 0.0, 0.0, formulation or inst.formulation.value, stats,
        reliability_feasible=False, notes=notes + inst.warnings,
    )


# --------------------------------------------------------------------------
# minimum-cost cover of one block


@dataclass(frozen=True)
class CoverResult:
    cost: float  # best cover found (inf if none)
    chosen: tuple[int, ...]
    lower_bound: float  # proven lower bound on the cheapest cover
    exact: bool


def min_cost_cover(
    costs: Sequence[float],
    weights: Sequence[float],
    need: float,
    groups: Sequence[int] | None = None,
    node_limit: int = 200_000,
    slack: float = 1e-9,
) -> CoverResult:
    """Cheapest subset with ``sum(weights) >= need - slack``.

    ``groups`` (optional) restricts the subset to at most one item per group
    label.  Depth-first search over items in cost-per-weight order, bounded
    by the fractional relaxation.  Among equal-cost covers the one whose
    sorted index tuple is smallest wins.  When ``node_limit`` stops the
    search, the best cover so far is returned together with the smallest
    bound over the unexplored subtrees.
    """
    n = len(costs)
    if need <= slack:
        return CoverResult(0.0, (), 0.0, True)
    items = [i for i in range(n) if weights[i] > 0]
    items.sort(key=lambda i: (costs[i] / weights[i], i))
    c = [float(costs[i]) for i in items]
    w = [float(weights[i]) for i in items]
    g = [groups[i] for i in items] if groups is not None else None
    m = len(items)
    # suffix sums let the search stop early when the rest cannot cover
    suffix_w = [0.0] * (m + 1)
    for j in range(m - 1, -1, -1):
        suffix_w[j] = suffix_w[j + 1] + w[j]

    def frac_bound(pos: int, remaining: float, used) -> float:
        extra = 0.0
        for j in range(pos, m):
            if used is not None and g[j] in used:
                continue
            if w[j] >= remaining - slack:
                return extra + c[j] * max(remaining, 0.0) / w[j]
            extra += c[j]
            remaining -= w[j]
        return math.inf

    root = frac_bound(0, need, frozenset() if g is not None else None)
    if not math.isfinite(root):
        return CoverResult(math.inf, (), math.inf, True)

    best_cost = math.inf
    best_key: tuple[int, ...] = ()
    nodes = 0

    def tie_tol(x: float) -> float:
        return 1e-9 * max(1.0, abs(x)) if math.isfinite(x) else 0.0

    # stack entries: (pos, cost, remaining need, chosen, used groups)
    stack = [(0, 0.0, need, (), frozenset() if g is not None else None)]
    while stack:
        if nodes >= node_limit:
            open_bound = min(
                (cost + frac_bound(pos, rem, used) for pos, cost, rem, _, used in stack),
                default=math.inf,
            )
            return CoverResult(best_cost, best_key, min(open_bound, best_cost), False)
        pos, cost, remaining, chosen, used = stack.pop()
        nodes += 1
        if remaining <= slack:
            key = tuple(sorted(chosen))
            tol = tie_tol(best_cost)
            if cost < best_cost - tol or (cost <= best_cost + tol and key < best_key):
                best_cost, best_key = cost, key
            continue
        if pos >= m or suffix_w[pos] < remaining - slack:
            continue
        bound = cost + frac_bound(pos, remaining, used)
        if bound > best_cost + tie_tol(best_cost):
            continue
        # exclude pushed first so that include is explored first
        stack.append((pos + 1, cost, remaining, chosen, used))
        if used is None or g[pos] not in used:
            new_used = used | {g[pos]} if used is not None else None
            stack.append((pos + 1, cost + c[pos], remaining - w[pos], chosen + (items[pos],), new_used))
    return CoverResult(best_cost, best_key, best_cost, True)
