import math
from dataclasses import replace

import numpy as np
import pytest

from reserveclear.core import (
    STATUS_INFEASIBLE,
    BlockAssignment,
    InfeasibleInstanceError,
    Member,
    Offer,
    Requirement,
)
from reserveclear.datagen import scenario
from reserveclear.engine import (
    build_instance,
    solve_branch_and_bound,
    solve_exact_enumeration,
    solve_unaware_benchmark,
    verify_solution,
)


@pytest.fixture(scope="module")
def small():
    return scenario("small-case")


def test_benchmark_small_case(small):
    inst = build_instance(*small, "unaware")
    res = solve_unaware_benchmark(inst)
    assert res.total_cost == pytest.approx(3960)
    assert res.total_volume == pytest.approx(40)
    assert res.achieved_reliability == pytest.approx(0.9801, abs=1e-6)
    assert not res.reliability_feasible
    assert res.status == STATUS_INFEASIBLE
    assert [len(a.accepted) for a in res.assignments] == [1, 1]


def test_benchmark_large_case():
    inst = build_instance(*scenario("large-case"), "unaware")
    res = solve_unaware_benchmark(inst)
    assert res.total_volume == pytest.approx(500)
    assert res.total_cost == pytest.approx(49_500)
    assert res.achieved_reliability == pytest.approx(0.99)
    assert not res.reliability_feasible


def test_benchmark_threshold_zero_single_offer():
    offers = [Offer("big", 100, 3, 0.5), Offer("other", 100, 5, 0.9)]
    inst = build_instance(offers, Requirement(80, 0.4), "unaware", benchmark_threshold=0.0)
    res = solve_unaware_benchmark(inst)
    assert [m.offer_id for a in res.assignments for m in a.accepted] == ["big"]
    assert res.reliability_feasible


def test_benchmark_insufficient_volume():
    offers = [Offer("a", 10, 3, 0.9), Offer("b", 100, 5, 0.5)]
    with pytest.raises(InfeasibleInstanceError):
        solve_unaware_benchmark(build_instance(offers, Requirement(80, 0.4), "unaware"))


def test_verify_linearised_solution_exactly(small):
    inst = build_instance(*small, "D")
    rep = verify_solution(inst, solve_branch_and_bound(inst))
    assert rep.passed, rep.violations
    assert rep.joint_reliability >= 0.9995
    assert rep.reliability_margin >= 0


def test_verify_alternative_linearised_portfolio(small):
    # blocks {1,3,4} and {5a,5b} at 20 MW
    offers, req = small
    by_id = {o.id: o for o in offers}
    inst = build_instance(offers, req, "D")
    res = solve_exact_enumeration(inst)
    blocks = []
    for b, ids in enumerate((["1", "3", "4"], ["5a", "5b"]), start=1):
        members = tuple(Member(i, True, 20.0, by_id[i].price, by_id[i].reliability) for i in ids)
        rel = 1 - math.prod(1 - by_id[i].reliability for i in ids)
        blocks.append(BlockAssignment(b, members, 20.0, rel))
    hand = replace(res, assignments=tuple(blocks), total_cost=9420.0, total_volume=100.0,
                   achieved_reliability=blocks[0].block_reliability * blocks[1].block_reliability)
    rep = verify_solution(inst, hand)
    assert rep.passed, rep.violations
    assert rep.joint_reliability == pytest.approx((1 - 2e-4) * (1 - 1e-4), abs=1e-12)


def test_verify_reports_short_quantity(small):
    inst = build_instance(*small, "A")
    res = solve_exact_enumeration(inst)
    first = res.assignments[0]
    m0 = first.members[0]
    broken = replace(first, members=(replace(m0, quantity=m0.quantity - 5),) + first.members[1:])
    rep = verify_solution(inst, replace(res, assignments=(broken,) + res.assignments[1:]))
    assert not rep.passed
    assert any("below the block volume" in v for v in rep.violations)


def test_verify_flags_benchmark_reliability_not_cost(small):
    inst = build_instance(*small, "unaware")
    rep = verify_solution(inst, solve_unaware_benchmark(inst))
    assert not rep.passed
    assert any("reliability" in v for v in rep.violations)
    assert not any("cost" in v for v in rep.violations)
    assert rep.cost == pytest.approx(3960)


def test_verify_reports_wrong_cost(small):
    inst = build_instance(*small, "A")
    res = solve_exact_enumeration(inst)
    rep = verify_solution(inst, replace(res, total_cost=res.total_cost - 1))
    assert any("cost" in v for v in rep.violations)


def test_verify_weighted_and_unweighted_reliability():
    offers = [Offer("1", 50, 10, 0.9), Offer("2", 50, 12, 0.8), Offer("3", 50, 20, 0.95)]
    gamma = np.array([[1, 0.8, 1], [0.8, 1, 1], [1, 1, 1.0]])
    inst = build_instance(offers, Requirement(40, 0.9), "F", correlation=gamma, enforce_system_weighting=True)
    res = solve_branch_and_bound(inst)
    rep = verify_solution(inst, res)
    assert rep.passed, rep.violations
    assert rep.weighted_joint_reliability is not None
    assert rep.joint_reliability >= 0.9
