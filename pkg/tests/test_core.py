import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reserveclear.core import (
    STATUS_GAP,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    AvailabilityDistribution,
    BlockAssignment,
    ClearingResult,
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

probs = st.floats(min_value=0.0, max_value=0.999999, allow_nan=False)


# --- block_reliability -------------------------------------------------------

def test_block_reliability_examples():
    assert block_reliability([0.90, 0.80]) == pytest.approx(0.98, abs=1e-12)
    assert block_reliability([0.98, 0.95]) == pytest.approx(0.999, abs=1e-12)
    assert block_reliability([]) == 0.0
    assert block_reliability([0.37]) == pytest.approx(0.37, abs=1e-15)


@pytest.mark.parametrize("bad", [1.0, -0.1, 1.5, float("nan")])
def test_block_reliability_rejects_out_of_range(bad):
    with pytest.raises(ReserveError):
        block_reliability([0.5, bad])


@given(st.lists(probs, min_size=1, max_size=8), st.floats(min_value=1e-6, max_value=0.999, allow_nan=False))
def test_adding_an_offer_strictly_helps(rels, extra):
    base = block_reliability(rels)
    more = block_reliability(rels + [extra])
    assert more >= base
    if base < 1.0 - 1e-12:
        assert more > base


@given(st.lists(probs, min_size=1, max_size=8))
def test_horizontal_stack_at_least_best_offer(rels):
    assert block_reliability(rels) >= max(rels) - 1e-15


# --- stack_reliability -------------------------------------------------------

def test_stack_reliability_examples():
    assert stack_reliability([0.95, 0.95]) == pytest.approx(0.9025, abs=1e-12)
    assert stack_reliability([0.9996, 0.9999]) == pytest.approx(0.99950004, abs=1e-12)
    assert stack_reliability([0.42]) == pytest.approx(0.42, abs=1e-15)
    assert stack_reliability([]) == 1.0
    assert stack_reliability([0.5, 0.0]) == 0.0


def test_stack_reliability_rejects_out_of_range():
    with pytest.raises(ReserveError):
        stack_reliability([1.1])


@given(st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=8))
def test_vertical_stack_at_most_worst_block(phis):
    assert stack_reliability(phis) <= min(phis) + 1e-15


# --- uniform_block_reliability / derive_block_count ---------------------------

def test_uniform_block_reliability_examples():
    psi2 = uniform_block_reliability(0.9995, 2)
    assert psi2 == pytest.approx(0.999749968, abs=1e-9)
    assert psi2**2 == pytest.approx(0.9995, abs=1e-12)
    assert uniform_block_reliability(0.9995, 1) == 0.9995
    assert uniform_block_reliability(0.9995, 5) == pytest.approx(0.99989998, abs=1e-8)


@given(st.floats(min_value=1e-6, max_value=0.999999), st.integers(min_value=1, max_value=500))
def test_uniform_block_reliability_round_trip(target, k):
    psi = uniform_block_reliability(target, k)
    assert abs(psi**k - target) <= 1e-12 * target


@pytest.mark.parametrize("target,k", [(0.0, 2), (1.0, 2), (0.9, 0), (0.9, 1.5)])
def test_uniform_block_reliability_rejects(target, k):
    with pytest.raises(ReserveError):
        uniform_block_reliability(target, k)


def test_derive_block_count_examples():
    assert derive_block_count(Requirement(500, 0.9995), 100) == 5
    assert derive_block_count(Requirement(40, 0.9995), 20) == 2
    assert derive_block_count(Requirement(500, 0.9995), 500) == 1
    assert derive_block_count(Requirement(501, 0.9995), 100) == 6


@pytest.mark.parametrize("size", [0, -5])
def test_derive_block_count_rejects_nonpositive(size):
    with pytest.raises(ReserveError):
        derive_block_count(Requirement(40, 0.9), size)


def test_with_min_bid():
    req = Requirement.with_min_bid(40, 0.9995, 20, min_block_volume=20)
    assert (req.block_count, req.min_block_volume) == (2, 20.0)


# --- domain types ---------------------------------------------------------------

def test_offer_validation():
    assert Offer("a", 10, 5, 0.5).source == "unspecified"
    for kwargs in (dict(volume=0), dict(price=-1), dict(reliability=1.0), dict(reliability=-0.1)):
        args = dict(id="a", volume=10, price=5, reliability=0.5) | kwargs
        with pytest.raises(ReserveError):
            Offer(**args)


def test_requirement_validation():
    for args in ((-1, 0.9), (10, 0.0), (10, 1.0), (10, 0.9, -1), (10, 0.9, 0, 0)):
        with pytest.raises(ReserveError):
            Requirement(*args)
    assert Requirement(0, 0.9).target_volume == 0.0


def _block(block_id, members, volume):
    accepted = [(oid, p, r) for oid, p, r in members]
    ms = tuple(Member(oid, True, volume, p, r) for oid, p, r in accepted)
    return BlockAssignment(block_id, ms, volume, block_reliability([r for _, _, r in accepted]))


def test_portfolio_metrics_small_case_solutions():
    exact = [
        _block(1, [("1", 80, 0.80), ("2", 90, 0.90), ("4", 98, 0.98)], 20),
        _block(2, [("5a", 99, 0.99), ("5b", 99, 0.99)], 20),
    ]
    cost, volume, rel = portfolio_metrics(exact)
    assert cost == pytest.approx(9320)
    assert volume == pytest.approx(100)
    assert rel == pytest.approx(0.99950004, abs=1e-12)

    linearised = [
        _block(1, [("1", 80, 0.80), ("3", 95, 0.95), ("4", 98, 0.98)], 20),
        _block(2, [("5a", 99, 0.99), ("5b", 99, 0.99)], 20),
    ]
    cost, volume, rel = portfolio_metrics(linearised)
    assert cost == pytest.approx(9420)
    assert volume == pytest.approx(100)
    assert rel == pytest.approx((1 - 2e-4) * (1 - 1e-4), abs=1e-12)
    assert portfolio_metrics([]) == (0.0, 0.0, 1.0)


def test_portfolio_metrics_flags_violations():
    bad = BlockAssignment(1, (Member("x", True, 5.0, 10, 0.9),), 20.0, 0.9)
    with pytest.raises(ReserveError, match="below the block volume"):
        portfolio_metrics([bad])
    wrong_rel = BlockAssignment(1, (Member("x", True, 20.0, 10, 0.9),), 20.0, 0.95)
    with pytest.raises(ReserveError, match="stated reliability"):
        portfolio_metrics([wrong_rel])


def test_result_round_trip():
    a = _block(1, [("1", 80, 0.80), ("2", 90, 0.90)], 20)
    res = ClearingResult((a,), 3400.0, 40.0, a.block_reliability, "MILP-D",
                         SolverStats(STATUS_OPTIMAL, 3, 0.5, 3400.0, 2), notes=("n",))
    back = ClearingResult.from_dict(res.to_dict(include_time=True))
    assert back.to_dict(include_time=True) == res.to_dict(include_time=True)
    assert "wall_time" not in res.to_dict()["solver_stats"]
    assert res.status == STATUS_OPTIMAL
    assert res.procured_volume == pytest.approx(20.0)
    assert res.status not in (STATUS_GAP, STATUS_INFEASIBLE)


def test_availability_distribution_invariants():
    d = AvailabilityDistribution(((0.0, 0.25), (10.0, 0.75)))
    assert d.prob_at_least(10) == pytest.approx(0.75)
    assert d.mass(0) == pytest.approx(0.25)
    with pytest.raises(ReserveError):
        AvailabilityDistribution(((0.0, 0.5), (10.0, 0.6)))
    with pytest.raises(ReserveError):
        AvailabilityDistribution(((10.0, 0.5), (0.0, 0.5)))


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=0.01, max_value=0.99), min_size=1, max_size=60))
def test_log_space_survives_many_offers(rels):
    # 1 - prod(1 - R) must stay a probability even when the product underflows
    r = block_reliability(rels)
    assert 0.0 <= r <= 1.0
    assert not math.isnan(r)
