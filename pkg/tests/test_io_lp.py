import json
import math

import numpy as np
import pytest

from reserveclear.core import Offer, ReserveError
from reserveclear.datagen import scenario
from reserveclear.engine import build_instance, build_milp, export_lp, parse_lp, solve
from reserveclear.io import (
    dumps_json,
    offers_to_csv,
    parse_offers_csv,
    parse_offers_json,
    read_offers,
    result_from_json,
    result_to_json,
)

SMALL_CSV = """id,volume_mw,reliability,price_per_mw,source
1,40,0.80,80,
2,30,0.90,90,
3,30,0.95,95,
4,30,0.98,98,
5a,20,0.99,99,
5b,20,0.99,99,
"""


def test_csv_ingestion():
    offers = parse_offers_csv(SMALL_CSV)
    assert len(offers) == 6
    assert offers[0].source == "unspecified"
    assert parse_offers_csv(offers_to_csv(offers)) == offers


def test_csv_without_source_column():
    offers = parse_offers_csv("id,volume_mw,reliability,price_per_mw\na,10,0.5,3\n")
    assert offers[0].source == "unspecified"


@pytest.mark.parametrize("text,message", [
    ("", "no offers"),
    ("id,volume_mw,reliability,price_per_mw,source\n", "no offers"),
    ("id,volume_mw,reliability,price_per_mw\na,10,1.0,3\n", "line 2"),
    ("id,volume_mw,reliability,price_per_mw\na,10,0.5,3\na,10,0.5,3\n", "duplicate"),
    ("id,volume_mw,reliability,price_per_mw\na,ten,0.5,3\n", "line 2"),
    ("id,volume,reliability\n", "header"),
])
def test_csv_errors(text, message):
    with pytest.raises(ReserveError, match=message):
        parse_offers_csv(text)


def test_reliability_one_message():
    with pytest.raises(ReserveError, match="reliability"):
        parse_offers_csv("id,volume_mw,reliability,price_per_mw\na,10,1.0,3\n")


def test_json_ingestion(tmp_path):
    rows = [{"id": "x", "volume_mw": 10, "reliability": 0.5, "price_per_mw": 2, "source": "wind"}]
    assert parse_offers_json(json.dumps(rows))[0].source == "wind"
    assert parse_offers_json(json.dumps({"offers": rows}))[0].id == "x"
    path = tmp_path / "book.json"
    path.write_text(json.dumps(rows))
    assert read_offers(path)[0].volume == 10
    with pytest.raises(ReserveError, match="no offers"):
        parse_offers_json("[]")
    with pytest.raises(ReserveError, match="cannot read"):
        read_offers(tmp_path / "missing.csv")


def test_result_json_round_trip():
    res = solve(build_instance(*scenario("small-case"), "A"))
    text = result_to_json(res)
    assert "wall_time" not in text
    back = result_from_json(text)
    assert result_to_json(back) == text
    assert back.total_cost == res.total_cost


def test_non_finite_become_null():
    assert json.loads(dumps_json({"x": math.inf, "y": [math.nan]})) == {"x": None, "y": [None]}


@pytest.mark.parametrize("formulation", ["D", "E", "G", "F"])
def test_lp_round_trip(formulation):
    offers, req = scenario("small-case")
    if formulation == "G":
        offers = [Offer(o.id, o.volume, o.price, o.reliability, source=f"s{j % 3}") for j, o in enumerate(offers)]
    kw = {"uniform_reliability": 0.8} if formulation == "E" else {}
    if formulation == "F":
        g = np.ones((6, 6))
        g[0, 1] = g[1, 0] = 0.7
        kw = {"correlation": g}
    try:
        inst = build_instance(offers, req, formulation, check_feasibility=False, **kw)
    except ReserveError:
        pytest.skip("instance not constructible")
    model = build_milp(inst)
    parsed = parse_lp(export_lp(inst))
    names = model.var_names
    assert parsed.objective == {names[j]: model.c[j] for j in range(len(names)) if model.c[j] != 0}
    assert sorted(parsed.binaries) == sorted(names[j] for j in range(len(names)) if model.binary[j])
    for r, row_name in enumerate(model.row_names):
        coeffs = {names[j]: model.A[r, j] for j in range(len(names)) if model.A[r, j] != 0}
        lo, hi = model.row_lo[r], model.row_hi[r]
        if math.isfinite(lo) and math.isfinite(hi) and lo != hi:
            assert parsed.rows[row_name + "_lo"] == (coeffs, ">=", lo)
            assert parsed.rows[row_name + "_hi"] == (coeffs, "<=", hi)
        elif lo == hi:
            assert parsed.rows[row_name] == (coeffs, "=", lo)
        elif math.isfinite(hi):
            assert parsed.rows[row_name] == (coeffs, "<=", hi)
        else:
            assert parsed.rows[row_name] == (coeffs, ">=", lo)
    for j, name in enumerate(names):
        if not model.binary[j]:
            assert parsed.bounds[name] == (model.lo[j], model.hi[j])


def test_lp_small_case_binaries_and_coefficients():
    inst = build_instance(*scenario("small-case"), "D")
    text = export_lp(inst)
    parsed = parse_lp(text)
    assert len(parsed.binaries) == 12
    rel = [r for name, r in parsed.rows.items() if name.startswith("rel")]
    assert len(rel) == 2
    for coeffs, sense, rhs in rel:
        assert sense == "<="
        for name, value in coeffs.items():
            i = int(name.split("_")[1]) - 1
            assert value == math.log1p(-inst.offers[i].reliability)
    assert export_lp(inst) == text


def test_lp_export_refuses_exact():
    with pytest.raises(ReserveError):
        export_lp(build_instance(*scenario("small-case"), "A"))
