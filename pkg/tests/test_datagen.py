import hashlib
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reserveclear.core import ReserveError
from reserveclear.datagen import CURVE_KINDS, CostCurve, grid_offer_book, percent_grid, price, scenario
from reserveclear.io import offers_to_csv

# frozen scenario outputs; a change here means the built-in case data drifted
GOLDEN = {
    "motivating": "7b624a93599e54097112b1d2c16e18c725d719b548754604fd1690416713c7e7",
    "small-case": "c5e847eee75cddf53486236447ce16e6a207572aa4c280ce5572806082ec3699",
    "large-case": "aaa776fc4815986cf8cc44ef4bc2d1e48209b5d39625f63cc501cacfabb0dc60",
    "block-sweep(250)": "237d24be4ccd2342417ead9ec99048a4bc31df24bdf6f47a27af695ccee9c074",
    "cost-sweep(cubic)": "901db213af4a5622e69fead76ae046e278606ad7b2e3f81011ed3df55ceb9ffa",
    "cost-sweep(logarithmic)": "70ed7b270bd4b4a1903425ec565a5f16adbbc46c9b635c1c32c7349071c3ce4f",
}


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_scenario_golden(name):
    offers, req = scenario(name)
    digest = hashlib.sha256((offers_to_csv(offers) + repr(req)).encode()).hexdigest()
    assert digest == GOLDEN[name]


def test_price_examples():
    assert price(CostCurve("linear"), 0.99) == pytest.approx(99)
    assert price(CostCurve("cubic"), 0.5) == pytest.approx(12.5)
    assert price(CostCurve("exponential"), 1 - 1e-12) == pytest.approx(100, abs=1e-9)
    assert price(CostCurve("constant", 7), 0.3) == 7
    assert price(CostCurve("logarithmic"), 0.9999) == pytest.approx(100 * math.log(1e4) / 9)


@pytest.mark.parametrize("r", [-0.1, 1.0, 2.0])
def test_price_domain(r):
    with pytest.raises(ReserveError):
        price(CostCurve(), r)


def test_unknown_curve():
    with pytest.raises(ReserveError):
        CostCurve("sqrt")


@given(st.floats(min_value=1e-9, max_value=1 - 1e-9))
def test_curve_ordering(r):
    cub, quad, lin, const = (price(CostCurve(k), r) for k in ("cubic", "quadratic", "linear", "constant"))
    assert cub <= quad <= lin <= const
    for kind in CURVE_KINDS:
        assert price(CostCurve(kind), r) >= 0


def test_grid_offer_book():
    book = grid_offer_book(percent_grid(), 500, CostCurve("linear"))
    assert len(book) == 99
    assert [o.price for o in book] == pytest.approx(list(range(1, 100)))
    (one,) = grid_offer_book([0.9], 10, CostCurve("quadratic"))
    assert one.price == pytest.approx(81)
    assert grid_offer_book([], 10, CostCurve()) == []


def test_scenarios():
    offers, req = scenario("small-case")
    assert len(offers) == 6
    assert sum(1 for o in offers if (o.volume, o.reliability, o.price) == (20, 0.99, 99)) == 2
    assert (req.target_volume, req.target_reliability, req.min_block_volume, req.block_count) == (40, 0.9995, 20, 2)
    offers, req = scenario("large-case")
    assert len(offers) == 99 and req.target_volume == 500 and req.target_reliability == 0.9995
    assert req.block_count == 5
    assert scenario("block-sweep(500)")[1].block_count == 1
    assert scenario("cost-sweep(cubic)")[0][49].price == pytest.approx(12.5)
    offers, req = scenario("motivating")
    assert (req.target_volume, req.target_reliability) == (100, 0.99)
    assert offers[1].price + offers[2].price == 95
    assert offers[3].price + offers[4].price + offers[5].price == 46


@pytest.mark.parametrize("name", ["nope", "block-sweep(x)", "block-sweep(0)", "cost-sweep(sqrt)"])
def test_unknown_scenarios(name):
    with pytest.raises(ReserveError):
        scenario(name)
