"""Clearing formulations and their solvers."""

from __future__ import annotations

from ..core import ClearingResult
from .benchmark import solve_unaware_benchmark
from .bnb import DEFAULT_EXACT_NODE_LIMIT, DEFAULT_NODE_LIMIT, SearchNode, solve_branch_and_bound, solve_rminlp
from .enumeration import DEFAULT_CAP, solve_exact_enumeration
from .lpformat import export_lp, parse_lp
from .model import (
    EXACT_FORMULATIONS,
    LINEAR_FORMULATIONS,
    Formulation,
    MilpModel,
    ProblemInstance,
    build_correlation_adjusted,
    build_instance,
    build_milp,
    build_source_restricted,
    min_offers_per_block,
    with_formulation,
)
from .subproblem import LpSubproblem, canonical_key, min_cost_cover
from .verify import VerificationReport, verify_solution


def solve(
    instance: ProblemInstance,
    *,
    node_limit: int | None = None,
    time_limit: float | None = None,
    workers: int = 1,
    enumeration_cap: int = DEFAULT_CAP,
) -> ClearingResult:
    """Solve with the method suited to the instance's formulation.

    The exact formulation is enumerated when it fits under
    ``enumeration_cap`` and otherwise solved through its log form.
    ``node_limit`` defaults to :data:`DEFAULT_EXACT_NODE_LIMIT` for the
    exact formulations and :data:`DEFAULT_NODE_LIMIT` otherwise.
    """
    f = instance.formulation
    if node_limit is None:
        node_limit = DEFAULT_EXACT_NODE_LIMIT if f in EXACT_FORMULATIONS else DEFAULT_NODE_LIMIT
    if f is Formulation.UNAWARE:
        return solve_unaware_benchmark(instance)
    limits = dict(node_limit=node_limit, time_limit=time_limit, workers=workers)
    if f is Formulation.MINLP_A:
        if instance.n_offers * instance.n_blocks <= enumeration_cap:
            return solve_exact_enumeration(instance, cap=enumeration_cap)
        return solve_rminlp(instance, **limits)
    if f is Formulation.RMINLP_C:
        return solve_rminlp(instance, **limits)
    return solve_branch_and_bound(instance, **limits)


__all__ = [
    "DEFAULT_CAP",
    "DEFAULT_EXACT_NODE_LIMIT",
    "DEFAULT_NODE_LIMIT",
    "EXACT_FORMULATIONS",
    "LINEAR_FORMULATIONS",
    "Formulation",
    "LpSubproblem",
    "MilpModel",
    "ProblemInstance",
    "SearchNode",
    "VerificationReport",
    "build_correlation_adjusted",
    "build_instance",
    "build_milp",
    "build_source_restricted",
    "canonical_key",
    "export_lp",
    "min_cost_cover",
    "min_offers_per_block",
    "parse_lp",
    "solve",
    "solve_branch_and_bound",
    "solve_exact_enumeration",
    "solve_rminlp",
    "solve_unaware_benchmark",
    "verify_solution",
    "with_formulation",
]
