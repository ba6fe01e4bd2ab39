"""Branch-and-bound over block acceptance decisions.

Every node fixes some ``z[i, b]`` to 0 or 1.  Bounds are tried cheapest
first:

1. reliability reachability: with every free offer accepted, can each block
   still reach its floor?
2. lexicographic block order, when blocks are interchangeable;
3. block decomposition: the exact cheapest reliable set per block (a small
   cover search, memoised) combined with the cheapest volume fill;
4. the LP relaxation of the row model, solved with the in-house simplex.

Nodes are taken best-first in fixed-size batches.  A batch is evaluated
against the incumbent known when it was formed, possibly on several threads,
and its outcomes are applied in order; the batch size does not depend on the
worker count, so the search and its result are identical for any number of
workers.
"""

from __future__ import annotations

import heapq
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import (
    LOG_SLACK,
    STATUS_GAP,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    ClearingResult,
    ReserveError,
    SolverStats,
)
from .model import EXACT_FORMULATIONS, LINEAR_FORMULATIONS, Formulation, ProblemInstance, build_milp
from .simplex import solve_lp
from .subproblem import (
    CoverResult,
    LpSubproblem,
    assemble_result,
    canonical_key,
    empty_result,
    infeasible_result,
    min_cost_cover,
)

FREE, REJECT, ACCEPT = -1, 0, 1
DEFAULT_NODE_LIMIT = 1_000_000
# exact-formulation relaxations are weak and their LPs large; stop early and report the gap
DEFAULT_EXACT_NODE_LIMIT = 500
BATCH_SIZE = 8
_INT_TOL = 1e-6


@dataclass
class SearchNode:
    """Partial acceptance pattern: ``fixed[i, b]`` is -1 (free), 0 or 1."""

    fixed: np.ndarray
    bound: float
    depth: int = 0
    history: tuple[tuple[int, int, int], ...] = ()


@dataclass
class _Outcome:
    kind: str  # pruned | solved | unresolved | branch
    bound: float = math.inf
    candidates: list = field(default_factory=list)  # (cost, key, sets, q)
    children: list = field(default_factory=list)
    lp_solves: int = 0


def _tol(x: float) -> float:
    return 1e-9 * max(1.0, abs(x)) if math.isfinite(x) else 0.0


class _Search:
    def __init__(self, inst: ProblemInstance, cover_node_limit: int):
        self.inst = inst
        self.n, self.k = inst.n_offers, inst.n_blocks
        self.exact = inst.formulation in EXACT_FORMULATIONS
        self.prices = [o.price for o in inst.offers]
        self.volumes = [o.volume for o in inst.offers]
        logs = inst.weighted_log_unavailability()
        self.logs = [float(v) for v in logs]
        self.weights = [-v for v in self.logs]
        self.eligible = [inst.eligible(i) for i in range(self.n)]
        self.lower = [inst.block_lower_volume(b) for b in range(self.k)]
        self.target = inst.requirement.target_volume
        self.log_phi = math.log(inst.requirement.target_reliability)
        if inst.formulation is Formulation.SOURCE_G:
            labels = sorted(inst.source_groups())
            self.group = [labels.index(o.source) for o in inst.offers]
        else:
            self.group = None
        self.count_rule = inst.formulation is Formulation.UNIFORM_E
        self.symmetric = inst.symmetric_blocks and self.k > 1
        self.cover_node_limit = cover_node_limit
        self._cover_memo: dict = {}
        if self.exact:
            psi = inst.requirement.target_reliability ** (1.0 / self.k)
            self.model = build_milp(inst, tighten=True, exact_floor=psi)
        else:
            self.model = build_milp(inst, tighten=True)
            self.block_need = [-math.log1p(-p) for p in inst.block_floor]

    # -- reliability floors -------------------------------------------------

    def node_needs(self, fixed: np.ndarray) -> list[float] | None:
        """Required ``-sum ln(1-R)`` per block at this node, or None if unreachable."""
        if not self.exact:
            return self.block_need
        # best reachable block reliabilities with every free offer accepted
        log_max = []
        for b in range(self.k):
            s = math.fsum(self.logs[i] for i in range(self.n) if fixed[i, b] != REJECT and self.eligible[i])
            phi = -math.expm1(s)
            if phi <= 0.0:
                return None
            log_max.append(math.log(phi))
        total = math.fsum(log_max)
        needs = []
        for b in range(self.k):
            floor_log = self.log_phi - LOG_SLACK - (total - log_max[b])
            if floor_log >= 0.0:
                return None
            needs.append(-math.log1p(-math.exp(floor_log)))
        return needs

    def reachable(self, fixed: np.ndarray, needs: Sequence[float]) -> bool:
        for b in range(self.k):
            open_ = [i for i in range(self.n) if fixed[i, b] != REJECT and self.eligible[i]]
            if not open_:
                return False
            if self.count_rule:
                if len(open_) < self.inst.min_offers[b]:
                    return False
                continue
            if self.group is not None:
                best: dict[int, float] = {}
                forced_groups = set()
                for i in open_:
                    g = self.group[i]
                    if fixed[i, b] == ACCEPT:
                        if g in forced_groups:
                            return False
                        forced_groups.add(g)
                        best[g] = self.weights[i]
                    elif g not in forced_groups:
                        best[g] = max(best.get(g, 0.0), self.weights[i])
                reach = math.fsum(best.values())
            else:
                reach = math.fsum(self.weights[i] for i in open_)
            if reach < needs[b] - LOG_SLACK:
                return False
        return True

    def lex_ok(self, fixed: np.ndarray) -> bool:
        """Can block columns still be ordered decreasingly (1 before 0)?"""
        if not self.symmetric:
            return True
        for b in range(self.k - 1):
            for i in range(self.n):
                a, c = fixed[i, b], fixed[i, b + 1]
                if a == FREE or c == FREE:
                    break
                if a > c:
                    break
                if a < c:
                    return False
        return True

    # -- block decomposition -------------------------------------------------

    def block_cover(self, fixed: np.ndarray, b: int, need: float):
        """Cheapest admissible block set under the node's fixings.

        Returns ``(cost_per_mw, lower_bound_per_mw, members, exact)`` or None.
        """
        forced = tuple(i for i in range(self.n) if fixed[i, b] == ACCEPT)
        free = tuple(i for i in range(self.n) if fixed[i, b] == FREE and self.eligible[i])
        n_min = self.inst.min_offers[b] if self.count_rule else 0
        key = (need, n_min, forced, free)
        hit = self._cover_memo.get(key)
        if hit is None:
            hit = self._cover(forced, free, need, n_min)
            self._cover_memo[key] = hit
        return hit

    def _cover(self, forced, free, need, n_min):
        if any(not self.eligible[i] for i in forced):
            return None
        base = math.fsum(self.prices[i] for i in forced)
        if self.group is not None:
            used = [self.group[i] for i in forced]
            if len(set(used)) < len(used):
                return None
            free = tuple(i for i in free if self.group[i] not in set(used))
        if self.count_rule:
            missing = n_min - len(forced)
            pick = sorted(free, key=lambda i: (self.prices[i], i))[: max(missing, 0)]
            if len(pick) < missing:
                return None
            chosen = tuple(pick)
            res = CoverResult(math.fsum(self.prices[i] for i in chosen), chosen, 0.0, True)
            res = CoverResult(res.cost, res.chosen, res.cost, True)
        else:
            rem = need - math.fsum(self.weights[i] for i in forced)
            res = min_cost_cover(
                [self.prices[i] for i in free],
                [self.weights[i] for i in free],
                rem,
                groups=[self.group[i] for i in free] if self.group is not None else None,
                node_limit=self.cover_node_limit,
                slack=LOG_SLACK,
            )
            if not math.isfinite(res.lower_bound):
                return None
            res = CoverResult(res.cost, tuple(free[j] for j in res.chosen), res.lower_bound, res.exact)
        chosen = res.chosen
        cost, lb = res.cost, res.lower_bound
        if not forced and not chosen:
            # a block may not be empty: add the cheapest single offer
            if not free:
                return None
            j = min(free, key=lambda i: (self.prices[i], i))
            chosen = (j,)
            cost = lb = self.prices[j]
        members = tuple(sorted(forced + chosen))
        return base + cost, base + lb, members, res.exact

    def decomposition(self, fixed: np.ndarray, needs: Sequence[float]):
        """Lower bound from independent per-block covers; also a candidate pattern."""
        covers = []
        for b in range(self.k):
            cov = self.block_cover(fixed, b, needs[b])
            if cov is None:
                return None
            covers.append(cov)
        ub = []
        for b in range(self.k):
            caps = [self.volumes[i] for i in range(self.n) if fixed[i, b] == ACCEPT]
            ub.append(min(caps) if caps else self.inst.big_m)
            if self.lower[b] > ub[b] + 1e-9:
                return None
        if math.fsum(ub) < self.target - 1e-9:
            return None
        q = list(self.lower)
        remaining = self.target - math.fsum(q)
        for b in sorted(range(self.k), key=lambda b: (covers[b][1], b)):
            if remaining <= 0:
                break
            add = min(remaining, ub[b] - q[b])
            q[b] += add
            remaining -= add
        bound = math.fsum(covers[b][1] * q[b] for b in range(self.k))
        sets = [c[2] for c in covers]
        exact = all(c[3] for c in covers)
        return bound, sets, exact

    # -- candidates ------------------------------------------------------------

    def exact_ok(self, sets: Sequence[Sequence[int]]) -> bool:
        """Nonlinear system constraint, where the formulation has one."""
        inst = self.inst
        if self.exact:
            total = 0.0
            for s in sets:
                phi = -math.expm1(math.fsum(self.logs[i] for i in s))
                if phi <= 0.0:
                    return False
                total += math.log(phi)
            return total >= self.log_phi - LOG_SLACK
        if inst.formulation is Formulation.CORRELATED_F and inst.enforce_system_weighting:
            total = 0.0
            for s in sets:
                phi = -math.expm1(math.fsum(self.logs[i] for i in s))
                if phi <= 0.0:
                    return False
                total += math.log(phi) * math.fsum(inst.weights[i] for i in s)
            return total >= self.log_phi - LOG_SLACK
        return True

    def candidate(self, sets: Sequence[Sequence[int]]):
        if not self.exact_ok(sets):
            return None
        sol = LpSubproblem.from_sets(self.inst, sets).solve()
        if sol is None:
            return None
        cost, q = sol
        return cost, canonical_key(sets), [tuple(s) for s in sets], q

    # -- node evaluation -----------------------------------------------------

    def evaluate(self, node: SearchNode, incumbent: float) -> _Outcome:
        fixed = node.fixed
        limit = incumbent + _tol(incumbent)
        needs = self.node_needs(fixed)
        if needs is None or not self.reachable(fixed, needs) or not self.lex_ok(fixed):
            return _Outcome("pruned")
        dec = self.decomposition(fixed, needs)
        if dec is None:
            return _Outcome("pruned")
        bound = max(node.bound, dec[0])
        if bound > limit:
            return _Outcome("pruned", bound)
        out = _Outcome("branch", bound)
        cand = self.candidate(dec[1])
        if cand is not None:
            out.candidates.append(cand)
            if cand[0] <= bound + _tol(bound):
                out.kind = "solved" if dec[2] else "unresolved"
                return out
            if not dec[2]:
                out.kind = "unresolved"
                return out

        out.lp_solves += 1
        lp = self.solve_relaxation(fixed, needs)
        if lp is None:
            out.kind = "pruned"
            return out
        lp_obj, zvals = lp
        bound = max(bound, lp_obj)
        out.bound = bound
        if bound > limit:
            out.kind = "pruned"
            return out
        free = fixed == FREE
        frac = np.where(free, np.minimum(zvals, 1.0 - zvals), 0.0)
        if frac.max() <= _INT_TOL:
            sets = [tuple(i for i in range(self.n) if zvals[i, b] > 0.5) for b in range(self.k)]
            cand = self.candidate(sets)
            if cand is not None:
                out.candidates.append(cand)
                if cand[0] <= bound + _tol(bound):
                    out.kind = "solved"
                    return out
            frees = np.argwhere(free)
            if frees.size == 0:
                out.kind = "pruned"
                return out
            i, b = (int(v) for v in frees[0])
        else:
            # most fractional; argmax returns the first, i.e. lowest offer then block
            i, b = (int(v) for v in np.unravel_index(int(np.argmax(frac)), frac.shape))
        for value in (ACCEPT, REJECT):
            child = fixed.copy()
            child[i, b] = value
            out.children.append(SearchNode(child, bound, node.depth + 1, node.history + ((i, b, value),)))
        return out

    def solve_relaxation(self, fixed: np.ndarray, needs: Sequence[float]):
        m = self.model
        lo = m.lo.copy()
        hi = m.hi.copy()
        zc = m.z_col
        lo[zc] = np.where(fixed == ACCEPT, 1.0, lo[zc])
        hi[zc] = np.where(fixed == REJECT, 0.0, hi[zc])
        row_hi = m.row_hi.copy()
        for b, r in enumerate(m.rel_rows):
            if r >= 0:
                row_hi[r] = -needs[b] + LOG_SLACK
        res = solve_lp(m.c, m.A, m.row_lo, row_hi, lo, hi)
        if res.status != "optimal":
            return None
        return res.objective, res.x[zc]

    # -- heuristics --------------------------------------------------------------

    def root_heuristic(self):
        """For exact formulations: per-block covers at the uniform split of the target."""
        if not self.exact:
            return None
        psi = self.inst.requirement.target_reliability ** (1.0 / self.k)
        need = -math.log1p(-psi)
        fixed = np.full((self.n, self.k), FREE, dtype=np.int8)
        sets = []
        for b in range(self.k):
            cov = self.block_cover(fixed, b, need)
            if cov is None:
                return None
            sets.append(cov[2])
        return self.candidate(sets)


def _better(cand, best) -> bool:
    if best is None:
        return True
    tol = _tol(best[0])
    return cand[0] < best[0] - tol or (cand[0] <= best[0] + tol and cand[1] < best[1])


def _search(
    inst: ProblemInstance,
    *,
    node_limit: int,
    time_limit: float | None,
    workers: int,
    batch_size: int,
    cover_node_limit: int,
    formulation_label: str | None = None,
    notes: Sequence[str] = (),
) -> ClearingResult:
    start = time.perf_counter()
    if inst.requirement.target_volume == 0:
        stats = SolverStats(STATUS_OPTIMAL, 0, time.perf_counter() - start, 0.0, 0)
        return empty_result(inst, stats, formulation_label)

    search = _Search(inst, cover_node_limit)
    fixed = np.full((inst.n_offers, inst.n_blocks), FREE, dtype=np.int8)
    for i in range(inst.n_offers):
        if not search.eligible[i]:
            fixed[i, :] = REJECT
    best = search.root_heuristic()
    heap: list = []
    seq = 0
    heapq.heappush(heap, (0.0, 0, seq, SearchNode(fixed, 0.0)))
    unresolved: list[float] = []
    nodes = 0
    lp_solves = 0
    stopped = False

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while heap:
            if nodes >= node_limit or (time_limit is not None and time.perf_counter() - start > time_limit):
                stopped = True
                break
            incumbent = best[0] if best is not None else math.inf
            limit = incumbent + _tol(incumbent)
            batch = []
            while heap and len(batch) < min(batch_size, node_limit - nodes):
                entry = heapq.heappop(heap)
                if entry[0] > limit:
                    heap.clear()
                    break
                batch.append(entry[3])
            if not batch:
                break
            if pool is not None:
                outcomes = list(pool.map(lambda nd: search.evaluate(nd, incumbent), batch))
            else:
                outcomes = [search.evaluate(nd, incumbent) for nd in batch]
            nodes += len(batch)
            for out in outcomes:
                lp_solves += out.lp_solves
                for cand in out.candidates:
                    if _better(cand, best):
                        best = cand
                if out.kind == "unresolved":
                    unresolved.append(out.bound)
                for child in out.children:
                    seq += 1
                    heapq.heappush(heap, (child.bound, -child.depth, seq, child))
    finally:
        if pool is not None:
            pool.shutdown()

    elapsed = time.perf_counter() - start
    incumbent = best[0] if best is not None else math.inf
    open_bounds = [e[0] for e in heap if e[0] <= incumbent + _tol(incumbent)] if stopped else []
    open_bounds += [u for u in unresolved if u < incumbent - _tol(incumbent)]
    if open_bounds:
        lower = min(min(open_bounds), incumbent)
        status = STATUS_GAP
    else:
        lower = incumbent
        status = STATUS_OPTIMAL if best is not None else STATUS_INFEASIBLE
    if best is None:
        stats = SolverStats(status, nodes, elapsed, lower if math.isfinite(lower) else None, lp_solves)
        note = "search exhausted without a feasible pattern" if status == STATUS_INFEASIBLE else "limit reached before a feasible pattern was found"
        return infeasible_result(inst, stats, formulation_label, note)
    stats = SolverStats(status, nodes, elapsed, lower, lp_solves)
    return assemble_result(inst, best[2], best[3], stats, formulation_label, notes)


def solve_branch_and_bound(
    instance: ProblemInstance,
    *,
    node_limit: int = DEFAULT_NODE_LIMIT,
    time_limit: float | None = None,
    workers: int = 1,
    batch_size: int = BATCH_SIZE,
    cover_node_limit: int = 200_000,
) -> ClearingResult:
    """Optimal clearing for the formulations with linear reliability rows (D, E, F, G).

    Hitting ``node_limit`` or ``time_limit`` returns the incumbent with status
    gap-limited and the proven lower bound in the solver statistics.  The
    time limit is the only input that can make results depend on machine
    speed; the node limit keeps them reproducible.
    """
    if instance.formulation not in LINEAR_FORMULATIONS:
        raise ReserveError(
            f"{instance.formulation.value} has nonlinear reliability constraints; use solve_rminlp"
        )
    return _search(
        instance,
        node_limit=node_limit,
        time_limit=time_limit,
        workers=max(1, int(workers)),
        batch_size=batch_size,
        cover_node_limit=cover_node_limit,
    )


def solve_rminlp(
    instance: ProblemInstance,
    *,
    node_limit: int = DEFAULT_EXACT_NODE_LIMIT,
    time_limit: float | None = None,
    workers: int = 1,
    batch_size: int = BATCH_SIZE,
    cover_node_limit: int = 200_000,
) -> ClearingResult:
    """Optimal clearing under the exact joint reliability constraint.

    Works on the log form, where the joint constraint is a sum of per-block
    terms: integral patterns are checked exactly, and fractional nodes use
    per-block floors implied by the best reliability the other blocks can
    still reach.  The exact and log forms share a feasible set, so either
    formulation tag is accepted.
    """
    if instance.formulation not in EXACT_FORMULATIONS:
        raise ReserveError(
            f"solve_rminlp needs an exact formulation ({Formulation.MINLP_A.value} or "
            f"{Formulation.RMINLP_C.value}), got {instance.formulation.value}"
        )
    notes = ()
    if instance.formulation is Formulation.MINLP_A:
        notes = ("solved through the equivalent log-reformulated model",)
    return _search(
        instance,
        node_limit=node_limit,
        time_limit=time_limit,
        workers=max(1, int(workers)),
        batch_size=batch_size,
        cover_node_limit=cover_node_limit,
        notes=notes,
    )
