"""Independent re-check of a cleared portfolio against its instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..core import LOG_SLACK, REL_TOL, ClearingResult, block_reliability
from .model import Formulation, ProblemInstance


@dataclass
class VerificationReport:
    passed: bool
    violations: list[str] = field(default_factory=list)
    cost: float = 0.0
    volume: float = 0.0
    procured_volume: float = 0.0
    joint_reliability: float = 1.0
    weighted_joint_reliability: float | None = None
    reliability_margin: float = 0.0  # joint reliability minus target; negative means a shortfall
    block_reliabilities: list[float] = field(default_factory=list)

    def summary(self) -> str:
        head = "PASS" if self.passed else f"FAIL ({len(self.violations)} violations)"
        lines = [
            f"{head}: cost {self.cost:.6f}, volume {self.volume:.6f} MW, "
            f"joint reliability {self.joint_reliability:.10f} (margin {self.reliability_margin:+.3e})"
        ]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": list(self.violations),
            "cost": self.cost,
            "volume": self.volume,
            "procured_volume": self.procured_volume,
            "joint_reliability": self.joint_reliability,
            "weighted_joint_reliability": self.weighted_joint_reliability,
            "reliability_margin": self.reliability_margin,
            "block_reliabilities": list(self.block_reliabilities),
        }


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=1e-9)


def verify_solution(instance: ProblemInstance, result: ClearingResult) -> VerificationReport:
    """Recheck every constraint of the instance from the raw assignments.

    Besides the formulation's own rows, the exact joint reliability target
    is always checked, so a linearised solution that over- or undershoots
    the true joint reliability shows up in ``reliability_margin``.
    """
    inst = instance
    req = inst.requirement
    f = inst.formulation
    v: list[str] = []
    index = {o.id: i for i, o in enumerate(inst.offers)}
    tol_mw = lambda x: REL_TOL * max(1.0, abs(x))  # noqa: E731

    if not result.assignments:
        if req.target_volume > 0:
            v.append("no portfolio: the result has no blocks")
        return VerificationReport(not v, v, joint_reliability=1.0 if req.target_volume == 0 else 0.0,
                                  reliability_margin=(1.0 if req.target_volume == 0 else 0.0) - req.target_reliability)

    supplied = [0.0] * inst.n_offers
    cost = 0.0
    volume = 0.0
    block_rel = []
    weighted_log_joint = 0.0
    for a in result.assignments:
        v.extend(a.violations())
        accepted = a.accepted
        if not accepted:
            v.append(f"block {a.block_id}: no accepted offer")
        members = []
        for m in a.members:
            i = index.get(m.offer_id)
            if i is None:
                v.append(f"block {a.block_id}: unknown offer {m.offer_id!r}")
                continue
            o = inst.offers[i]
            if not _close(m.price, o.price) or m.reliability != o.reliability:
                v.append(f"block {a.block_id}: offer {o.id} price or reliability differs from the offer book")
            if m.accepted:
                members.append(i)
                supplied[i] += m.quantity
            cost += m.quantity * o.price
            volume += m.quantity
        if len(set(members)) < len(members):
            v.append(f"block {a.block_id}: an offer appears more than once")
        phi = block_reliability(inst.offers[i].reliability for i in members)
        block_rel.append(phi)
        if f is not Formulation.UNAWARE and a.block_volume < req.min_block_volume - tol_mw(req.min_block_volume):
            v.append(f"block {a.block_id}: volume {a.block_volume:g} MW below the minimum block volume")
        weighted = math.fsum(inst.weights[i] * inst.offers[i].log_unavailability for i in members)
        b = a.block_id - 1
        if f in (Formulation.MILP_D, Formulation.CORRELATED_F, Formulation.SOURCE_G) and 0 <= b < inst.n_blocks:
            floor = inst.block_floor[b]
            if weighted > math.log1p(-floor) + LOG_SLACK:
                v.append(f"block {a.block_id}: reliability {-math.expm1(weighted):.12g} below the block floor {floor:.12g}")
        if f is Formulation.SOURCE_G:
            srcs = [inst.offers[i].source for i in members]
            for s in sorted(set(srcs)):
                if srcs.count(s) > 1:
                    v.append(f"block {a.block_id}: {srcs.count(s)} offers from source {s!r}")
        if f is Formulation.UNIFORM_E and 0 <= b < inst.n_blocks:
            if len(members) < inst.min_offers[b]:
                v.append(f"block {a.block_id}: {len(members)} offers, at least {inst.min_offers[b]} required")
            for i in members:
                if not inst.eligible(i):
                    v.append(f"block {a.block_id}: offer {inst.offers[i].id} is below the uniform reliability")
            low = inst.block_lower_volume(b)
            if a.block_volume < low - tol_mw(low):
                v.append(f"block {a.block_id}: volume {a.block_volume:g} MW below {low:g} MW implied by the nonzero-volume row")
        wphi = -math.expm1(weighted)
        weighted_log_joint += (math.log(wphi) if wphi > 0 else -math.inf) * math.fsum(inst.weights[i] for i in members)

    if f is not Formulation.UNAWARE and len(result.assignments) != inst.n_blocks:
        v.append(f"{len(result.assignments)} blocks, expected {inst.n_blocks}")
    for i, o in enumerate(inst.offers):
        if supplied[i] > o.volume + tol_mw(o.volume):
            v.append(f"offer {o.id}: supplies {supplied[i]:g} MW across blocks, offered {o.volume:g} MW")
    procured = math.fsum(a.block_volume for a in result.assignments)
    if procured < req.target_volume - tol_mw(req.target_volume):
        v.append(f"procured {procured:g} MW, required {req.target_volume:g} MW")

    joint = math.prod(block_rel)
    if joint <= 0 or math.log(joint) < math.log(req.target_reliability) - LOG_SLACK:
        v.append(f"joint reliability {joint:.10f} below the target {req.target_reliability:g}")
    weighted_joint = None
    if f is Formulation.CORRELATED_F:
        weighted_joint = math.exp(weighted_log_joint) if math.isfinite(weighted_log_joint) else 0.0
        if inst.enforce_system_weighting and weighted_log_joint < math.log(req.target_reliability) - LOG_SLACK:
            v.append(f"weighted system reliability {weighted_joint:.10f} below the target")

    if not _close(cost, result.total_cost):
        v.append(f"reported cost {result.total_cost!r} differs from recomputed {cost!r}")
    if not _close(volume, result.total_volume):
        v.append(f"reported volume {result.total_volume!r} differs from recomputed {volume!r}")
    if not math.isclose(joint, result.achieved_reliability, rel_tol=1e-12, abs_tol=1e-15):
        v.append(f"reported reliability {result.achieved_reliability!r} differs from recomputed {joint!r}")
    return VerificationReport(
        passed=not v,
        violations=v,
        cost=cost,
        volume=volume,
        procured_volume=procured,
        joint_reliability=joint,
        weighted_joint_reliability=weighted_joint,
        reliability_margin=joint - req.target_reliability,
        block_reliabilities=block_rel,
    )
