import csv
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from reserveclear.cli import main
from reserveclear.io import read_result


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_clear_small_case_table(capsys):
    code, out, _ = run(capsys, "clear", "--scenario", "small-case", "--formulation", "A")
    assert code == 0
    assert "9,320" in out and "100 MW" in out and "99.950 %" in out
    assert "Time" not in out
    code, out, _ = run(capsys, "clear", "-s", "small-case", "-f", "D", "--timing")
    assert code == 0
    assert "Time" in out


def test_clear_benchmark_is_flagged_infeasible(capsys):
    code, out, err = run(capsys, "clear", "-s", "small-case", "-f", "unaware")
    assert code == 2
    assert "3,960" in out and "(infeas.)" in out and "98.010 %" in out
    assert "infeasible" in err


def test_clear_gap_limited_exit_code(capsys):
    code, out, _ = run(capsys, "clear", "-s", "large-case", "-f", "C", "--node-limit", "2")
    assert code == 3
    assert "gap-limited" in out and "lower bound" in out


def test_clear_infeasible_instance(capsys, tmp_path):
    book = tmp_path / "book.csv"
    book.write_text("id,volume_mw,reliability,price_per_mw\na,100,0.5,1\n")
    code, _, err = run(capsys, "clear", "-i", str(book), "--q", "50", "--phi", "0.9995")
    assert code == 2
    assert "unachievable" in err


def test_usage_and_input_errors(capsys, tmp_path):
    assert run(capsys, "clear")[0] == 1
    assert run(capsys, "clear", "-s", "nope")[0] == 1
    assert run(capsys, "clear", "-i", str(tmp_path / "none.csv"), "--q", "1", "--phi", "0.5")[0] == 1
    code, _, err = run(capsys, "clear", "-i", str(tmp_path / "none.csv"))
    assert code == 1 and "--q and --phi" in err
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = run(capsys, "clear", "-i", str(empty), "--q", "1", "--phi", "0.5")
    assert code == 1 and "no offers" in err
    assert run(capsys, "clear", "-s", "small-case", "--phi", "1.2")[0] == 1
    assert run(capsys, "clear", "-s", "small-case", "--workers", "0")[0] == 1


def test_outputs_and_schema(capsys, tmp_path):
    code, _, _ = run(capsys, "clear", "-s", "small-case", "-f", "D", "--out", str(tmp_path), "--workers", "2")
    assert code == 0
    result = json.loads((tmp_path / "result.json").read_text())
    schema = json.loads(resources.files("reserveclear").joinpath("schemas/result.schema.json").read_text())
    jsonschema.validate(result, schema)
    run_info = json.loads((tmp_path / "run.json").read_text())
    assert run_info["config"]["workers"] == 2
    assert "wall_time" in run_info
    assert (tmp_path / "table.txt").read_text().startswith("Problem")


@pytest.mark.parametrize("formulation", ["A", "C", "D", "unaware"])
def test_results_byte_identical_across_workers(capsys, tmp_path, formulation):
    texts = []
    for workers in ("1", "4", "1"):
        out = tmp_path / f"{formulation}-{workers}-{len(texts)}"
        run(capsys, "clear", "-s", "small-case", "-f", formulation, "--workers", workers, "--out", str(out))
        texts.append((out / "result.json").read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_pipeline_csv_clear_validate(capsys, tmp_path):
    book = tmp_path / "small.csv"
    assert run(capsys, "scenario", "small-case", "--out", str(book))[0] == 0
    args = ["-i", str(book), "--q", "40", "--phi", "0.9995", "--bmin", "20", "--min-bid", "20"]
    assert run(capsys, "clear", *args, "-f", "C", "--out", str(tmp_path / "c"))[0] == 0
    result = read_result(tmp_path / "c" / "result.json")
    assert result.total_cost == pytest.approx(9320)
    code, out, _ = run(capsys, "validate", str(tmp_path / "c" / "result.json"), *args)
    assert code == 0
    assert out.startswith("PASS")
    code, out, _ = run(capsys, "validate", str(tmp_path / "c" / "result.json"), *args,
                       "--samples", "20000", "--format", "json")
    report = json.loads(out)
    assert report["verification"]["violations"] == []
    assert report["delivery_probability"] >= 0.9995
    assert report["monte_carlo"]["samples"] == 20000


def test_validate_detects_tampering(capsys, tmp_path):
    run(capsys, "clear", "-s", "small-case", "-f", "A", "--out", str(tmp_path))
    data = json.loads((tmp_path / "result.json").read_text())
    data["total_cost"] -= 100
    (tmp_path / "bad.json").write_text(json.dumps(data))
    code, out, _ = run(capsys, "validate", str(tmp_path / "bad.json"), "-s", "small-case")
    assert code == 2
    assert "FAIL" in out


def test_validate_common_source(capsys, tmp_path):
    run(capsys, "clear", "-s", "small-case", "-f", "A", "--out", str(tmp_path))
    code, out, _ = run(capsys, "validate", str(tmp_path / "result.json"), "-s", "small-case",
                       "--model", "common-source", "--shock", "unspecified=0.999", "--format", "json")
    assert code == 0
    assert json.loads(out)["availability_model"] == "common-source"


def test_sweep_block_size(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "block-size", "--points", "500,250,100", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert [r["parameter"] for r in rows] == ["500", "250", "100"]
    assert [float(r["psi"]) for r in rows] == pytest.approx([0.9995, 0.9995**0.5, 0.9995**0.2], abs=1e-12)
    assert all(r["wall_time"] for r in rows)
    assert (tmp_path / "result_500.json").exists()


def test_sweep_single_point_and_failure(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "cost-curve", "--points", "cubic", "--out", str(tmp_path))
    assert code == 0
    assert len(list(csv.DictReader((tmp_path / "sweep.csv").open()))) == 1
    code, out, _ = run(capsys, "sweep", "cost-curve", "--points", "cubic,sqrt", "--out", str(tmp_path / "f"))
    rows = list(csv.DictReader((tmp_path / "f" / "sweep.csv").open()))
    assert [r["status"] for r in rows] == ["proven-optimal", "error"]
    assert "sqrt" in rows[1]["error"]
    assert code == 1


def test_export_lp(capsys, tmp_path):
    code, _, _ = run(capsys, "export-lp", "-s", "small-case", "-f", "D", "--out", str(tmp_path))
    assert code == 0
    text = (tmp_path / "small-case.lp").read_text()
    assert "Binaries" in text
    code, _, err = run(capsys, "export-lp", "-s", "small-case", "-f", "A")
    assert code == 1 and "MILP-D" in err


def test_scenario_listing(capsys):
    code, out, _ = run(capsys, "scenario", "--list")
    assert code == 0 and "small-case" in out
    code, out, _ = run(capsys, "scenario", "motivating")
    assert out.splitlines()[0] == "id,volume_mw,reliability,price_per_mw,source"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "reserveclear", "clear", "-s", "small-case", "-f", "unaware"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "3,960" in proc.stdout
