"""Reliability-aware reserve market clearing.

Offers carry a volume, a price per MW and an availability probability.
Clearing selects, for each stacked procurement block, a set of offers
whose joint availability meets a reliability target at least cost.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    REL_TOL,
    STATUS_GAP,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    AvailabilityDistribution,
    BlockAssignment,
    ClearingResult,
    InfeasibleInstanceError,
    Member,
    Offer,
    ReserveError,
    Requirement,
    SolverStats,
    block_reliability,
    derive_block_count,
    portfolio_metrics,
    stack_reliability,
    uniform_block_reliability,
)
from .datagen import CostCurve, scenario  # noqa: E402
from .engine import Formulation, ProblemInstance, build_instance, solve, verify_solution  # noqa: E402
from .validate import AvailabilityModel, delivery_probability  # noqa: E402

__all__ = [
    "AvailabilityDistribution",
    "AvailabilityModel",
    "BlockAssignment",
    "ClearingResult",
    "CostCurve",
    "Formulation",
    "InfeasibleInstanceError",
    "Member",
    "Offer",
    "ProblemInstance",
    "REL_TOL",
    "ReserveError",
    "Requirement",
    "STATUS_GAP",
    "STATUS_INFEASIBLE",
    "STATUS_OPTIMAL",
    "SolverStats",
    "__version__",
    "block_reliability",
    "build_instance",
    "delivery_probability",
    "derive_block_count",
    "portfolio_metrics",
    "scenario",
    "solve",
    "stack_reliability",
    "uniform_block_reliability",
    "verify_solution",
]
