"""Domain types and the reliability-stacking algebra.

Horizontal stacking (offers side by side in one procurement block) raises
reliability: a block fails only when every member fails.  Vertical stacking
(blocks on top of each other) adds volume but multiplies reliabilities, so
the portfolio fails as soon as one block fails.

All products of probabilities are evaluated as sums of logarithms; tiny
unavailabilities such as 1e-5 survive many stacked offers that way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

#: Relative tolerance for equality checks on money and megawatts.
REL_TOL = 1e-9
#: Absolute slack for reliability constraints evaluated in log space.
LOG_SLACK = 1e-9

STATUS_OPTIMAL = "proven-optimal"
STATUS_GAP = "gap-limited"
STATUS_INFEASIBLE = "infeasible"


class ReserveError(ValueError):
    """Base class for invalid inputs and unsolvable requests."""


class InfeasibleInstanceError(ReserveError):
    """Raised when an instance is infeasible by construction."""


def _check_probability(value: float, name: str, *, allow_one: bool = False) -> float:
    value = float(value)
    upper_ok = value <= 1.0 if allow_one else value < 1.0
    if not (value >= 0.0 and upper_ok) or math.isnan(value):
        bound = "[0, 1]" if allow_one else "[0, 1)"
        raise ReserveError(f"{name} must lie in {bound}, got {value!r}")
    return value


@dataclass(frozen=True)
class Offer:
    """A probabilistic reserve offer.

    ``reliability`` is the probability that the offered capacity is there
    when activated.  A reliability of exactly 1 is refused: every provider
    carries some residual risk and ``ln(1 - R)`` must stay finite.
    """

    id: str
    volume: float
    price: float
    reliability: float
    source: str = "unspecified"

    def __post_init__(self) -> None:
        if not str(self.id):
            raise ReserveError("offer id must be a non-empty string")
        object.__setattr__(self, "id", str(self.id))
        volume = float(self.volume)
        price = float(self.price)
        if not volume > 0 or math.isinf(volume):
            raise ReserveError(f"offer {self.id}: volume must be positive, got {self.volume!r}")
        if not price >= 0 or math.isinf(price):
            raise ReserveError(f"offer {self.id}: price must be nonnegative, got {self.price!r}")
        object.__setattr__(self, "volume", volume)
        object.__setattr__(self, "price", price)
        object.__setattr__(
            self, "reliability", _check_probability(self.reliability, f"offer {self.id}: reliability")
        )
        object.__setattr__(self, "source", str(self.source or "unspecified"))

    @property
    def log_unavailability(self) -> float:
        """``ln(1 - R)``; always finite and nonpositive."""
        return math.log1p(-self.reliability)


def check_offer_book(offers: Sequence[Offer]) -> tuple[Offer, ...]:
    """Return the book as a tuple after checking ids are unique."""
    offers = tuple(offers)
    seen: set[str] = set()
    for offer in offers:
        if not isinstance(offer, Offer):
            raise ReserveError(f"expected Offer, got {type(offer).__name__}")
        if offer.id in seen:
            raise ReserveError(f"duplicate offer id {offer.id!r}")
        seen.add(offer.id)
    return offers


@dataclass(frozen=True)
class Requirement:
    """What the system operator asks for.

    ``block_count`` is the number of procurement blocks stacked vertically;
    use :meth:`with_min_bid` to derive it from a minimum bid size.
    ``big_m`` defaults to the largest offered volume when the instance is
    built.  A zero ``target_volume`` is accepted as a degenerate request
    that clears to an empty portfolio.
    """

    target_volume: float
    target_reliability: float
    min_block_volume: float = 0.0
    block_count: int = 1
    big_m: float | None = None

    def __post_init__(self) -> None:
        q = float(self.target_volume)
        if not q >= 0 or math.isinf(q):
            raise ReserveError(f"target volume must be nonnegative and finite, got {self.target_volume!r}")
        phi = float(self.target_reliability)
        if not 0.0 < phi < 1.0:
            raise ReserveError(f"target reliability must lie in (0, 1), got {self.target_reliability!r}")
        bmin = float(self.min_block_volume)
        if not bmin >= 0 or math.isinf(bmin):
            raise ReserveError(f"minimum block volume must be nonnegative, got {self.min_block_volume!r}")
        if int(self.block_count) != self.block_count or int(self.block_count) < 1:
            raise ReserveError(f"block count must be a positive integer, got {self.block_count!r}")
        object.__setattr__(self, "target_volume", q)
        object.__setattr__(self, "target_reliability", phi)
        object.__setattr__(self, "min_block_volume", bmin)
        object.__setattr__(self, "block_count", int(self.block_count))
        if self.big_m is not None:
            m = float(self.big_m)
            if not m > 0 or math.isinf(m):
                raise ReserveError(f"big-M must be positive and finite, got {self.big_m!r}")
            object.__setattr__(self, "big_m", m)

    @classmethod
    def with_min_bid(
        cls,
        target_volume: float,
        target_reliability: float,
        min_bid_size: float,
        min_block_volume: float = 0.0,
        big_m: float | None = None,
    ) -> "Requirement":
        base = cls(target_volume, target_reliability, min_block_volume, 1, big_m)
        return cls(
            target_volume,
            target_reliability,
            min_block_volume,
            derive_block_count(base, min_bid_size),
            big_m,
        )


@dataclass(frozen=True)
class Member:
    """One offer's participation in a block.

    Price and reliability are copied from the offer so that an assignment
    can be re-evaluated without the offer book.
    """

    offer_id: str
    accepted: bool
    quantity: float
    price: float
    reliability: float

    def to_dict(self) -> dict:
        return {
            "offer_id": self.offer_id,
            "accepted": self.accepted,
            "quantity": self.quantity,
            "price": self.price,
            "reliability": self.reliability,
        }


@dataclass(frozen=True)
class BlockAssignment:
    block_id: int
    members: tuple[Member, ...]
    block_volume: float
    block_reliability: float

    @property
    def accepted(self) -> tuple[Member, ...]:
        return tuple(m for m in self.members if m.accepted)

    def violations(self) -> list[str]:
        """Return human-readable invariant violations (empty when sound)."""
        out = []
        tol = REL_TOL * max(1.0, abs(self.block_volume))
        for m in self.members:
            if m.accepted and m.quantity < self.block_volume - tol:
                out.append(
                    f"block {self.block_id}: offer {m.offer_id} supplies {m.quantity:g} MW "
                    f"below the block volume {self.block_volume:g} MW"
                )
            if not m.accepted and abs(m.quantity) > tol:
                out.append(f"block {self.block_id}: offer {m.offer_id} is not accepted but carries {m.quantity:g} MW")
            if m.quantity < -tol:
                out.append(f"block {self.block_id}: offer {m.offer_id} has negative quantity")
        expected = block_reliability([m.reliability for m in self.accepted])
        if not math.isclose(self.block_reliability, expected, rel_tol=1e-12, abs_tol=1e-15):
            out.append(
                f"block {self.block_id}: stated reliability {self.block_reliability!r} "
                f"differs from stacked value {expected!r}"
            )
        return out

    def to_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "block_volume": self.block_volume,
            "block_reliability": self.block_reliability,
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BlockAssignment":
        return cls(
            block_id=int(data["block_id"]),
            members=tuple(
                Member(
                    str(m["offer_id"]),
                    bool(m["accepted"]),
                    float(m["quantity"]),
                    float(m["price"]),
                    float(m["reliability"]),
                )
                for m in data["members"]
            ),
            block_volume=float(data["block_volume"]),
            block_reliability=float(data["block_reliability"]),
        )


@dataclass(frozen=True)
class SolverStats:
    status: str
    nodes: int = 0
    wall_time: float = 0.0
    lower_bound: float | None = None
    lp_solves: int = 0

    def to_dict(self, include_time: bool = False) -> dict:
        out = {
            "status": self.status,
            "nodes": self.nodes,
            "lower_bound": self.lower_bound,
            "lp_solves": self.lp_solves,
        }
        if include_time:
            out["wall_time"] = self.wall_time
        return out


@dataclass(frozen=True)
class ClearingResult:
    """A cleared portfolio and how it was obtained.

    ``status`` is ``infeasible`` both when a solver proved infeasibility
    (no assignments) and when a benchmark clearing misses the reliability
    target (assignments present, ``reliability_feasible`` false).
    """

    assignments: tuple[BlockAssignment, ...]
    total_cost: float
    total_volume: float
    achieved_reliability: float
    formulation: str
    stats: SolverStats
    reliability_feasible: bool = True
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def status(self) -> str:
        return self.stats.status

    @property
    def procured_volume(self) -> float:
        """Sum of block volumes, the quantity compared against the requirement."""
        return math.fsum(a.block_volume for a in self.assignments)

    def to_dict(self, include_time: bool = False) -> dict:
        return {
            "formulation": self.formulation,
            "status": self.status,
            "total_cost": self.total_cost,
            "total_volume": self.total_volume,
            "procured_volume": self.procured_volume,
            "achieved_reliability": self.achieved_reliability,
            "reliability_feasible": self.reliability_feasible,
            "solver_stats": self.stats.to_dict(include_time),
            "notes": list(self.notes),
            "assignments": [a.to_dict() for a in self.assignments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClearingResult":
        stats = data.get("solver_stats", {})
        return cls(
            assignments=tuple(BlockAssignment.from_dict(a) for a in data["assignments"]),
            total_cost=float(data["total_cost"]),
            total_volume=float(data["total_volume"]),
            achieved_reliability=float(data["achieved_reliability"]),
            formulation=str(data["formulation"]),
            stats=SolverStats(
                status=str(stats.get("status", data.get("status"))),
                nodes=int(stats.get("nodes", 0)),
                wall_time=float(stats.get("wall_time", 0.0)),
                lower_bound=stats.get("lower_bound"),
                lp_solves=int(stats.get("lp_solves", 0)),
            ),
            reliability_feasible=bool(data.get("reliability_feasible", True)),
            notes=tuple(data.get("notes", ())),
        )


@dataclass(frozen=True)
class AvailabilityDistribution:
    """Probability mass over deliverable volume outcomes."""

    support: tuple[tuple[float, float], ...]
    model: str = "independence"

    def __post_init__(self) -> None:
        volumes = [v for v, _ in self.support]
        if any(v < 0 for v in volumes):
            raise ReserveError("support volumes must be nonnegative")
        if any(b <= a for a, b in zip(volumes, volumes[1:])):
            raise ReserveError("support volumes must be strictly increasing")
        total = math.fsum(p for _, p in self.support)
        if abs(total - 1.0) > 1e-9:
            raise ReserveError(f"masses sum to {total!r}, not 1")

    def prob_at_least(self, volume: float, tol: float = 1e-9) -> float:
        return math.fsum(p for v, p in self.support if v >= volume - tol * max(1.0, abs(volume)))

    def mass(self, volume: float, tol: float = 1e-9) -> float:
        return math.fsum(p for v, p in self.support if abs(v - volume) <= tol * max(1.0, abs(volume)))


def block_reliability(reliabilities: Iterable[float]) -> float:
    """Reliability of offers stacked horizontally: ``1 - prod(1 - R_i)``."""
    log_unavail = math.fsum(
        math.log1p(-_check_probability(r, "offer reliability")) for r in reliabilities
    )
    return -math.expm1(log_unavail)


def stack_reliability(block_reliabilities: Iterable[float]) -> float:
    """Reliability of blocks stacked vertically: ``prod(phi_b)``."""
    logs = []
    for phi in block_reliabilities:
        phi = _check_probability(phi, "block reliability", allow_one=True)
        if phi == 0.0:
            return 0.0
        logs.append(math.log(phi))
    return math.exp(math.fsum(logs))


def uniform_block_reliability(target: float, block_count: int) -> float:
    """Per-block floor ``target ** (1 / block_count)`` that meets ``target`` jointly."""
    target = float(target)
    if not 0.0 < target < 1.0:
        raise ReserveError(f"target reliability must lie in (0, 1), got {target!r}")
    if int(block_count) != block_count or block_count < 1:
        raise ReserveError(f"block count must be a positive integer, got {block_count!r}")
    return math.exp(math.log(target) / int(block_count))


def derive_block_count(requirement: Requirement, min_bid_size: float) -> int:
    """Number of blocks ``ceil(Q / S)`` for minimum bid size ``S``."""
    min_bid_size = float(min_bid_size)
    if not min_bid_size > 0 or math.isinf(min_bid_size):
        raise ReserveError(f"minimum bid size must be positive, got {min_bid_size!r}")
    ratio = requirement.target_volume / min_bid_size
    # 500 / 100 must give 5, not 6, under rounding noise
    count = math.ceil(ratio - 1e-12 * max(1.0, ratio))
    return max(1, count)


def portfolio_metrics(assignments: Sequence[BlockAssignment]) -> tuple[float, float, float]:
    """Recompute ``(total_cost, total_volume, achieved_reliability)``.

    Raises :class:`ReserveError` listing invariant violations instead of
    computing numbers from an inconsistent assignment.
    """
    problems = [msg for a in assignments for msg in a.violations()]
    if problems:
        raise ReserveError("; ".join(problems))
    cost = math.fsum(m.quantity * m.price for a in assignments for m in a.members)
    volume = math.fsum(m.quantity for a in assignments for m in a.members)
    reliability = stack_reliability(a.block_reliability for a in assignments)
    return cost, volume, reliability
