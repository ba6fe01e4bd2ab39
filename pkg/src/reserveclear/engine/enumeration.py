"""Exhaustive-enumeration oracle.

Deliberately shares no search code with the branch-and-bound solver:
reliability is checked with direct probability products rather than log
sums, and every block-volume LP is solved by enumerating the vertices of its
feasible polyhedron instead of by simplex.
"""

from __future__ import annotations

import itertools
import math
import time
from typing import Sequence

import numpy as np

from ..core import LOG_SLACK, STATUS_INFEASIBLE, STATUS_OPTIMAL, ReserveError, SolverStats
from .model import EXACT_FORMULATIONS, Formulation, ProblemInstance
from .subproblem import assemble_result, canonical_key, empty_result, infeasible_result

DEFAULT_CAP = 24

# a probability comparison p >= target passes when p >= target * exp(-slack)
_SLACK_FACTOR = math.exp(-LOG_SLACK)


def _unavailability(inst: ProblemInstance, subset: Sequence[int]) -> float:
    return math.prod((1.0 - inst.offers[i].reliability) ** inst.weights[i] for i in subset)


def _block_candidates(inst: ProblemInstance, b: int) -> list[tuple[int, ...]]:
    """Nonempty offer subsets admissible in block ``b`` on their own."""
    f = inst.formulation
    pool = [i for i in range(inst.n_offers) if inst.eligible(i)]
    out = []
    for size in range(1, len(pool) + 1):
        for subset in itertools.combinations(pool, size):
            if f is Formulation.SOURCE_G:
                sources = [inst.offers[i].source for i in subset]
                if len(set(sources)) < len(sources):
                    continue
            if f is Formulation.UNIFORM_E:
                if size < inst.min_offers[b]:
                    continue
            elif f not in EXACT_FORMULATIONS:
                # 1 - unavailability >= floor, compared on the unavailability side
                limit = (1.0 - inst.block_floor[b]) / _SLACK_FACTOR
                if _unavailability(inst, subset) > limit:
                    continue
            out.append(subset)
    return out


def _jointly_feasible(inst: ProblemInstance, sets: Sequence[Sequence[int]]) -> bool:
    target = inst.requirement.target_reliability * _SLACK_FACTOR
    if inst.formulation in EXACT_FORMULATIONS:
        joint = math.prod(1.0 - _unavailability(inst, s) for s in sets)
        return joint >= target
    if inst.formulation is Formulation.CORRELATED_F and inst.enforce_system_weighting:
        total = 0.0
        for s in sets:
            phi = 1.0 - _unavailability(inst, s)
            if phi <= 0.0:
                return False
            total += math.log(phi) * sum(inst.weights[i] for i in s)
        return total >= math.log(inst.requirement.target_reliability) - LOG_SLACK
    return True


def vertex_lp(
    costs: np.ndarray, lower: np.ndarray, target: float, caps: Sequence[tuple[Sequence[int], float]]
) -> tuple[float, np.ndarray] | None:
    """Minimise ``costs @ q`` by checking every vertex of the block-volume polyhedron.

    Constraints: ``sum(q) >= target``, ``q >= lower``, and for each
    ``(blocks, cap)`` in ``caps``, ``sum(q[blocks]) <= cap``.  Costs are
    nonnegative and ``q`` is bounded below, so an optimum (if any) sits at a
    vertex.
    """
    k = costs.size
    # rows as G q >= h
    G = [np.ones(k)]
    h = [target]
    for b in range(k):
        e = np.zeros(k)
        e[b] = 1.0
        G.append(e)
        h.append(lower[b])
    for blocks, cap in caps:
        row = np.zeros(k)
        row[list(blocks)] = -1.0
        G.append(row)
        h.append(-cap)
    G = np.array(G)
    h = np.array(h)
    combos = np.array(list(itertools.combinations(range(len(h)), k)))
    mats = G[combos]
    rhs = h[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-9
    if not ok.any():
        return None
    verts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    scale = np.maximum(1.0, np.abs(h))
    feasible = np.all(verts @ G.T >= h - 1e-9 * scale, axis=1)
    if not feasible.any():
        return None
    verts = verts[feasible]
    values = verts @ costs
    j = int(np.argmin(values))
    q = np.maximum(verts[j], lower)
    return float(costs @ q), q


def solve_exact_enumeration(instance: ProblemInstance, cap: int = DEFAULT_CAP):
    """Globally optimal clearing by trying every acceptance pattern.

    Raises :class:`ReserveError` when ``offers x blocks`` exceeds ``cap``.
    Ties in cost are resolved by the smallest canonical pattern (block sets
    sorted).  The branch-and-bound search applies the same rule to the
    patterns it visits, so on exactly tied optima the two may report
    different, equally cheap portfolios.
    """
    inst = instance
    start = time.perf_counter()
    n, k = inst.n_offers, inst.n_blocks
    if inst.formulation is Formulation.UNAWARE:
        raise ReserveError("the unaware benchmark is not an optimisation problem; use solve_unaware_benchmark")
    if n * k > cap:
        raise ReserveError(f"enumeration cap exceeded: {n} offers x {k} blocks > {cap} binary variables")
    if inst.requirement.target_volume == 0:
        return empty_result(inst, SolverStats(STATUS_OPTIMAL, wall_time=time.perf_counter() - start, lower_bound=0.0))

    per_block = [_block_candidates(inst, b) for b in range(k)]
    if inst.symmetric_blocks:
        patterns = itertools.combinations_with_replacement(per_block[0], k)
    else:
        patterns = itertools.product(*per_block)

    prices = np.array([o.price for o in inst.offers])
    lower = np.array([inst.block_lower_volume(b) for b in range(k)])
    target = inst.requirement.target_volume
    best = None  # (cost, key, sets, q)
    visited = 0
    lp_count = 0
    for sets in patterns:
        visited += 1
        if not _jointly_feasible(inst, sets):
            continue
        costs = np.array([prices[list(s)].sum() for s in sets])
        if best is not None:
            # q >= lower and sum(q) >= Q bound the LP value from below
            floor = float(costs @ lower) + max(0.0, target - lower.sum()) * float(costs.min())
            if floor > best[0] + 1e-9 * max(1.0, abs(best[0])):
                continue
        caps = []
        for i, o in enumerate(inst.offers):
            blocks = [b for b, s in enumerate(sets) if i in s]
            if blocks:
                caps.append((blocks, o.volume))
        lp_count += 1
        sol = vertex_lp(costs, lower, target, caps)
        if sol is None:
            continue
        cost, q = sol
        key = canonical_key(sets)
        if best is None:
            best = (cost, key, sets, q)
            continue
        tol = 1e-9 * max(1.0, abs(best[0]))
        if cost < best[0] - tol or (cost <= best[0] + tol and key < best[1]):
            best = (cost, key, sets, q)

    elapsed = time.perf_counter() - start
    if best is None:
        stats = SolverStats(STATUS_INFEASIBLE, visited, elapsed, None, lp_count)
        return infeasible_result(inst, stats, note="no acceptance pattern satisfies the constraints")
    stats = SolverStats(STATUS_OPTIMAL, visited, elapsed, best[0], lp_count)
    return assemble_result(inst, best[2], best[3], stats)
