"""Reliability-unaware merit-order clearing, used as a point of comparison."""

from __future__ import annotations

import math
import time

from ..core import (
    LOG_SLACK,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    BlockAssignment,
    ClearingResult,
    InfeasibleInstanceError,
    Member,
    SolverStats,
    stack_reliability,
)
from .model import Formulation, ProblemInstance


def solve_unaware_benchmark(instance: ProblemInstance, threshold: float | None = None) -> ClearingResult:
    """Clear offers with reliability at or above ``threshold`` in price order.

    Each cleared offer forms its own vertical block, so the ex-post joint
    reliability is the product of the cleared offers' reliabilities.  When
    that misses the system target the portfolio is still returned (cost and
    volume are meaningful) but flagged ``reliability_feasible=False``.
    """
    start = time.perf_counter()
    inst = instance
    if threshold is None:
        threshold = inst.benchmark_threshold
    if threshold is None:
        threshold = max(o.reliability for o in inst.offers)
    need = inst.requirement.target_volume
    qualifying = sorted(
        (i for i, o in enumerate(inst.offers) if o.reliability >= threshold),
        key=lambda i: (inst.offers[i].price, i),
    )
    available = math.fsum(inst.offers[i].volume for i in qualifying)
    if available < need - 1e-9:
        raise InfeasibleInstanceError(
            f"offers with reliability >= {threshold:g} supply {available:g} MW, below the {need:g} MW requirement"
        )
    blocks = []
    remaining = need
    for i in qualifying:
        if remaining <= 1e-12:
            break
        o = inst.offers[i]
        qty = min(o.volume, remaining)
        remaining -= qty
        member = Member(o.id, True, qty, o.price, o.reliability)
        blocks.append(BlockAssignment(len(blocks) + 1, (member,), qty, o.reliability))
    cost = math.fsum(a.block_volume * a.members[0].price for a in blocks)
    volume = math.fsum(a.block_volume for a in blocks)
    reliability = stack_reliability(a.block_reliability for a in blocks)
    target = inst.requirement.target_reliability
    feasible = reliability > 0 and math.log(reliability) >= math.log(target) - LOG_SLACK
    notes = [f"merit order over offers with reliability >= {threshold:g}"]
    if not feasible:
        notes.append(f"ex-post reliability {reliability:.6f} misses the target {target:g}")
    stats = SolverStats(STATUS_OPTIMAL if feasible else STATUS_INFEASIBLE, 0, time.perf_counter() - start, cost, 0)
    return ClearingResult(
        assignments=tuple(blocks),
        total_cost=cost,
        total_volume=volume,
        achieved_reliability=reliability,
        formulation=Formulation.UNAWARE.value,
        stats=stats,
        reliability_feasible=feasible,
        notes=tuple(notes),
    )
