"""Command-line front end: ``reserveclear <verb> ...``.

Exit codes: 0 proven optimal (or a passing validation), 1 bad input or
usage, 2 infeasible (or a failing validation), 3 gap-limited.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import (
    STATUS_GAP,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    ClearingResult,
    InfeasibleInstanceError,
    Offer,
    ReserveError,
    Requirement,
    derive_block_count,
    uniform_block_reliability,
)
from .datagen import BLOCK_SWEEP_SIZES, COST_SWEEP_CURVES, SCENARIO_NAMES, scenario
from .engine import (
    DEFAULT_CAP,
    DEFAULT_EXACT_NODE_LIMIT,
    DEFAULT_NODE_LIMIT,
    Formulation,
    ProblemInstance,
    build_instance,
    export_lp,
    solve,
    verify_solution,
)
from .io import dumps_json, offers_to_csv, read_offers, read_result, result_to_json
from .validate import AvailabilityModel, delivery_probability, monte_carlo, result_portfolio

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_GAP = 0, 1, 2, 3
_STATUS_EXIT = {STATUS_OPTIMAL: EXIT_OK, STATUS_INFEASIBLE: EXIT_INFEASIBLE, STATUS_GAP: EXIT_GAP}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 means infeasible here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    input: str | None
    scenario: str | None
    formulation: str
    q: float | None
    phi: float | None
    bmin: float | None
    blocks: int | None
    min_bid: float | None
    psi: float | None
    uniform_reliability: float | None
    correlation: str | None
    enforce_system_weighting: bool
    threshold: float | None
    seed: int
    workers: int
    node_limit: int | None
    time_limit: float | None
    cap: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------------------
# shared option groups


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", "-i", help="offer book (.csv or .json)")
    src.add_argument("--scenario", "-s", help=f"named case study: {', '.join(SCENARIO_NAMES)}")


def _add_requirement(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("requirement (overrides the scenario's values)")
    g.add_argument("--q", type=float, help="required volume in MW")
    g.add_argument("--phi", type=float, help="required joint reliability, in (0, 1)")
    g.add_argument("--bmin", type=float, help="minimum block volume in MW")
    blocks = g.add_mutually_exclusive_group()
    blocks.add_argument("--blocks", type=int, help="number of blocks")
    blocks.add_argument("--min-bid", type=float, help="minimum bid size; blocks = ceil(q / min-bid)")


def _add_formulation(p: argparse.ArgumentParser, default: str = "MILP-D") -> None:
    g = p.add_argument_group("formulation")
    g.add_argument(
        "--formulation", "-f", default=default,
        help="MINLP-A, rMINLP-C, MILP-D, Uniform-E, Correlated-F, SourceRestricted-G or UnawareBenchmark "
             "(short forms A, C, D, E, F, G, unaware)",
    )
    g.add_argument("--psi", type=float, help="per-block reliability floor (default: phi^(1/blocks))")
    g.add_argument("--uniform-reliability", type=float, help="offer reliability class for Uniform-E")
    g.add_argument("--correlation", help="CSV matrix of pairwise correlation parameters for Correlated-F")
    g.add_argument("--enforce-system-weighting", action="store_true",
                   help="Correlated-F: also enforce the weighted system reliability constraint")
    g.add_argument("--threshold", type=float, help="reliability threshold of the unaware benchmark")


def _add_limits(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--seed", type=int, default=0, help="random seed (sampling only; the solvers are deterministic)")
    g.add_argument("--workers", type=int, default=1, help="worker threads")
    g.add_argument("--node-limit", type=int,
                   help=f"branch-and-bound node cap (default {DEFAULT_NODE_LIMIT:,}; "
                        f"{DEFAULT_EXACT_NODE_LIMIT:,} for the exact formulations)")
    g.add_argument("--time-limit", type=float, help="wall-clock cap in seconds (results may then vary by machine)")
    g.add_argument("--cap", type=int, default=DEFAULT_CAP,
                   help="largest offers x blocks count solved by exhaustive enumeration")


def _config(args) -> RunConfig:
    return RunConfig(
        input=args.input, scenario=args.scenario, formulation=args.formulation,
        q=args.q, phi=args.phi, bmin=args.bmin, blocks=args.blocks, min_bid=args.min_bid,
        psi=args.psi, uniform_reliability=args.uniform_reliability, correlation=args.correlation,
        enforce_system_weighting=args.enforce_system_weighting, threshold=args.threshold,
        seed=args.seed, workers=args.workers, node_limit=args.node_limit,
        time_limit=args.time_limit, cap=args.cap,
    )


# --------------------------------------------------------------------------
# building instances


def load_offers_and_requirement(cfg: RunConfig) -> tuple[list[Offer], Requirement]:
    if cfg.scenario:
        offers, base = scenario(cfg.scenario)
    else:
        if cfg.q is None or cfg.phi is None:
            raise ReserveError("--q and --phi are required with --input")
        offers = read_offers(cfg.input)
        base = None
    q = cfg.q if cfg.q is not None else (base.target_volume if base else None)
    phi = cfg.phi if cfg.phi is not None else (base.target_reliability if base else None)
    if q is None or phi is None:
        raise ReserveError("--q and --phi are required with --input")
    bmin = cfg.bmin if cfg.bmin is not None else (base.min_block_volume if base else 0.0)
    probe = Requirement(q, phi, bmin)
    if cfg.blocks is not None:
        k = cfg.blocks
    elif cfg.min_bid is not None:
        k = derive_block_count(probe, cfg.min_bid)
    elif base is not None and cfg.q is None:
        k = base.block_count
    elif base is not None and base.min_block_volume > 0:
        # scenario sizes its blocks by the minimum block volume; keep that when q changes
        k = derive_block_count(probe, base.min_block_volume)
    else:
        k = 1
    return offers, Requirement(q, phi, bmin, k)


def _read_matrix(path: str) -> np.ndarray:
    try:
        rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r and any(c.strip() for c in r)]
        return np.array([[float(c) for c in r] for r in rows])
    except (OSError, ValueError) as exc:
        raise ReserveError(f"cannot read correlation matrix {path}: {exc}") from None


def build_from_config(cfg: RunConfig) -> ProblemInstance:
    offers, req = load_offers_and_requirement(cfg)
    correlation = _read_matrix(cfg.correlation) if cfg.correlation else None
    return build_instance(
        offers, req, cfg.formulation,
        block_floor=cfg.psi,
        uniform_reliability=cfg.uniform_reliability,
        correlation=correlation,
        benchmark_threshold=cfg.threshold,
        enforce_system_weighting=cfg.enforce_system_weighting,
    )


def run_solver(inst: ProblemInstance, cfg: RunConfig) -> ClearingResult:
    return solve(
        inst, node_limit=cfg.node_limit, time_limit=cfg.time_limit,
        workers=cfg.workers, enumeration_cap=cfg.cap,
    )


# --------------------------------------------------------------------------
# rendering


def _money(x: float) -> str:
    return "-" if not math.isfinite(x) else f"{x:,.2f}".rstrip("0").rstrip(".")


def _mw(x: float) -> str:
    return f"{x:,.2f}".rstrip("0").rstrip(".") + " MW"


def _pct(x: float, digits: int = 3) -> str:
    return f"{100.0 * x:.{digits}f} %"


def render_table(rows: Sequence[dict], columns: Sequence[tuple[str, str]]) -> str:
    """Fixed-width text table; values are preformatted strings."""
    widths = [max(len(h), *(len(r[key]) for r in rows)) if rows else len(h) for key, h in columns]
    head = "  ".join(h.ljust(w) if j == 0 else h.rjust(w) for j, ((_, h), w) in enumerate(zip(columns, widths)))
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append("  ".join(
            r[key].ljust(w) if j == 0 else r[key].rjust(w) for j, ((key, _), w) in enumerate(zip(columns, widths))
        ))
    return "\n".join(lines) + "\n"


def result_row(result: ClearingResult, timing: bool = False) -> dict:
    rel = _pct(result.achieved_reliability) if result.assignments else "-"
    if not result.reliability_feasible and result.assignments:
        rel += " (infeas.)"
    row = {
        "problem": result.formulation,
        "cost": _money(result.total_cost),
        "volume": _mw(result.total_volume),
        "reliability": rel,
        "status": result.status,
    }
    if timing:
        row["time"] = f"{result.stats.wall_time:.3f} s"
    return row


def result_table(result: ClearingResult, timing: bool = False) -> str:
    cols = [("problem", "Problem"), ("cost", "Cost"), ("volume", "Volume"),
            ("reliability", "Reliability"), ("status", "Status")]
    if timing:
        cols.append(("time", "Time"))
    out = render_table([result_row(result, timing)], cols)
    if result.assignments:
        block_rows = []
        for a in result.assignments:
            block_rows.append({
                "block": str(a.block_id),
                "offers": " ".join(m.offer_id for m in a.accepted),
                "volume": _mw(a.block_volume),
                "reliability": _pct(a.block_reliability, 5),
            })
        out += "\n" + render_table(
            block_rows, [("block", "Block"), ("offers", "Offers"), ("volume", "Volume"), ("reliability", "Reliability")]
        )
    if result.status == STATUS_GAP and result.stats.lower_bound is not None:
        lb = result.stats.lower_bound
        gap = (result.total_cost - lb) / max(1.0, abs(result.total_cost))
        out += f"lower bound: {_money(lb)} (relative gap {100 * gap:.4f} %)\n"
    for note in result.notes:
        out += f"note: {note}\n"
    return out


def _write_outputs(out_dir: str | None, files: dict[str, str]) -> None:
    if not out_dir:
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)


# --------------------------------------------------------------------------
# verbs


def cmd_clear(args) -> int:
    cfg = _config(args)
    try:
        inst = build_from_config(cfg)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        _write_outputs(args.out, {"run.json": dumps_json({"config": cfg.to_dict(), "status": STATUS_INFEASIBLE,
                                                          "error": str(exc), "version": __version__})})
        return EXIT_INFEASIBLE
    try:
        result = run_solver(inst, cfg)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    table = result_table(result, args.timing)
    result_json = result_to_json(result)
    if args.format == "json":
        sys.stdout.write(result_json)
    else:
        sys.stdout.write(table)
    run = {
        "config": cfg.to_dict(),
        "status": result.status,
        "wall_time": result.stats.wall_time,
        "version": __version__,
    }
    _write_outputs(args.out, {"result.json": result_json, "table.txt": result_table(result, False),
                              "run.json": dumps_json(run)})
    if result.status == STATUS_INFEASIBLE:
        print("infeasible: " + "; ".join(result.notes or ("no feasible portfolio",)), file=sys.stderr)
    return _STATUS_EXIT[result.status]


def cmd_validate(args) -> int:
    cfg = _config(args)
    result = read_result(args.result)
    if args.formulation is None:
        cfg.formulation = result.formulation
    inst = build_from_config(cfg)
    report = verify_solution(inst, result)
    if args.model == "common-source":
        shock = {}
        for item in args.shock or ():
            name, _, value = item.partition("=")
            try:
                shock[name] = float(value)
            except ValueError:
                raise ReserveError(f"--shock expects source=probability, got {item!r}") from None
        model = AvailabilityModel.common_source(shock)
    else:
        model = AvailabilityModel()
    target = inst.requirement.target_volume
    exact = delivery_probability(result, target, model, offers=inst.offers, seed=args.seed)
    out = {
        "verification": report.to_dict(),
        "availability_model": model.kind,
        "delivery_probability": exact,
        "block_product": report.joint_reliability,
    }
    lines = [report.summary(),
             f"P(deliverable >= {target:g} MW) = {exact:.10f} under {model.kind} "
             f"(block product {report.joint_reliability:.10f})"]
    if args.samples:
        est, half = monte_carlo(result_portfolio(result, inst.offers), model, target,
                                args.samples, args.seed, workers=cfg.workers)
        out["monte_carlo"] = {"estimate": est, "halfwidth95": half, "samples": args.samples, "seed": args.seed}
        lines.append(f"Monte Carlo ({args.samples} samples, seed {args.seed}): {est:.8f} +/- {half:.8f}")
    text = "\n".join(lines) + "\n"
    if args.format == "json":
        sys.stdout.write(dumps_json(out))
    else:
        sys.stdout.write(text)
    _write_outputs(args.out, {"validation.json": dumps_json(out), "validation.txt": text})
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


SWEEP_FIELDS = ("parameter", "blocks", "psi", "status", "cost", "total_volume", "procured_volume",
                "achieved_reliability", "nodes", "wall_time", "error")


def run_sweep(kind: str, points: Sequence[str], cfg: RunConfig) -> tuple[list[dict], dict[str, ClearingResult]]:
    """Clear the large case once per sweep point; failures are recorded, not raised."""
    rows = []
    results = {}
    for point in points:
        name = f"block-sweep({point})" if kind == "block-size" else f"cost-sweep({point})"
        row = {f: "" for f in SWEEP_FIELDS}
        row["parameter"] = point
        try:
            point_cfg = RunConfig(**{**cfg.to_dict(), "scenario": name, "input": None})
            inst = build_from_config(point_cfg)
            k = inst.n_blocks
            row["blocks"] = k
            row["psi"] = inst.block_floor[0] if inst.block_floor else uniform_block_reliability(
                inst.requirement.target_reliability, k)
            result = run_solver(inst, point_cfg)
            results[point] = result
            row.update(
                status=result.status, cost=result.total_cost, total_volume=result.total_volume,
                procured_volume=result.procured_volume, achieved_reliability=result.achieved_reliability,
                nodes=result.stats.nodes, wall_time=result.stats.wall_time,
            )
        except ReserveError as exc:
            row["status"] = STATUS_INFEASIBLE if isinstance(exc, InfeasibleInstanceError) else "error"
            row["error"] = str(exc)
        rows.append(row)
    return rows, results


def sweep_csv(rows: Sequence[dict], timing: bool = True) -> str:
    buf = _io.StringIO()
    fields = [f for f in SWEEP_FIELDS if timing or f != "wall_time"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_sweep(args) -> int:
    args.input = None
    args.scenario = "large-case"
    cfg = _config(args)
    if args.points:
        points = [p.strip() for p in args.points.split(",") if p.strip()]
    elif args.kind == "block-size":
        points = [f"{s:g}" for s in BLOCK_SWEEP_SIZES]
    else:
        points = list(COST_SWEEP_CURVES)
    rows, results = run_sweep(args.kind, points, cfg)
    table_rows = []
    for r in rows:
        tr = {
            "parameter": str(r["parameter"]),
            "blocks": str(r["blocks"]),
            "psi": _pct(r["psi"], 5) if r["psi"] != "" else "-",
            "cost": _money(r["cost"]) if r["cost"] != "" else "-",
            "volume": _mw(r["total_volume"]) if r["total_volume"] != "" else "-",
            "reliability": _pct(r["achieved_reliability"]) if r["achieved_reliability"] != "" else "-",
            "status": r["status"],
        }
        if args.timing:
            tr["time"] = f"{r['wall_time']:.3f} s" if r["wall_time"] != "" else "-"
        table_rows.append(tr)
    cols = [("parameter", "Block size" if args.kind == "block-size" else "Curve"), ("blocks", "Blocks"),
            ("psi", "Block reliability"), ("cost", "Cost"), ("volume", "Volume"),
            ("reliability", "Reliability"), ("status", "Status")]
    if args.timing:
        cols.append(("time", "Time"))
    table = render_table(table_rows, cols)
    for r in rows:
        if r["error"]:
            table += f"point {r['parameter']}: {r['error']}\n"
    sys.stdout.write(table)
    files = {"sweep.csv": sweep_csv(rows), "table.txt": render_table(table_rows, cols),
             "run.json": dumps_json({"config": cfg.to_dict(), "kind": args.kind, "points": points,
                                     "version": __version__})}
    for point, res in results.items():
        files[f"result_{point}.json"] = result_to_json(res)
    _write_outputs(args.out, files)
    statuses = [r["status"] for r in rows]
    if "error" in statuses:
        return EXIT_INPUT
    if STATUS_INFEASIBLE in statuses:
        return EXIT_INFEASIBLE
    if STATUS_GAP in statuses:
        return EXIT_GAP
    return EXIT_OK


def cmd_export_lp(args) -> int:
    cfg = _config(args)
    inst = build_from_config(cfg)
    if inst.formulation not in (Formulation.MILP_D, Formulation.UNIFORM_E, Formulation.CORRELATED_F,
                                Formulation.SOURCE_G):
        raise ReserveError(
            f"{inst.formulation.value} cannot be written as a linear model; use one of "
            "MILP-D, Uniform-E, Correlated-F or SourceRestricted-G"
        )
    stem = (cfg.scenario or Path(cfg.input).stem).replace("(", "-").replace(")", "")
    text = export_lp(inst, title=f"{stem} {inst.formulation.value}")
    if args.out:
        out = Path(args.out)
        if out.suffix.lower() != ".lp":
            out.mkdir(parents=True, exist_ok=True)
            out = out / f"{stem}.lp"
        out.write_text(text)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.list or not args.name:
        for name in SCENARIO_NAMES:
            print(name)
        return EXIT_OK
    offers, req = scenario(args.name)
    text = offers_to_csv(offers)
    info = {
        "scenario": args.name,
        "target_volume": req.target_volume,
        "target_reliability": req.target_reliability,
        "min_block_volume": req.min_block_volume,
        "block_count": req.block_count,
        "offers": len(offers),
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        print(json.dumps(info, sort_keys=True), file=sys.stderr)
    else:
        sys.stdout.write(text)
        print(json.dumps(info, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reserveclear", description="Reliability-aware reserve market clearing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    c = sub.add_parser("clear", help="clear an offer book")
    _add_source(c)
    _add_requirement(c)
    _add_formulation(c)
    _add_limits(c)
    c.add_argument("--out", "-o", help="directory for result.json, run.json and table.txt")
    c.add_argument("--format", choices=("table", "json"), default="table", help="what to print")
    c.add_argument("--timing", action="store_true", help="show solve wall time in the table")
    c.set_defaults(func=cmd_clear)

    v = sub.add_parser("validate", help="re-check a result file and compute its delivery probability")
    v.add_argument("result", help="result.json written by 'clear'")
    _add_source(v)
    _add_requirement(v)
    _add_formulation(v, default=None)
    _add_limits(v)
    v.add_argument("--model", choices=("independence", "common-source"), default="independence")
    v.add_argument("--shock", action="append", metavar="SOURCE=P",
                   help="common-source shock probability (repeatable)")
    v.add_argument("--samples", type=int, default=0, help="also estimate by Monte Carlo with this many samples")
    v.add_argument("--out", "-o", help="directory for validation.json and validation.txt")
    v.add_argument("--format", choices=("table", "json"), default="table")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("sweep", help="clear the large case across block sizes or cost curves")
    s.add_argument("kind", choices=("block-size", "cost-curve"))
    s.add_argument("--points", help="comma-separated block sizes (MW) or curve names")
    _add_requirement(s)
    _add_formulation(s)
    _add_limits(s)
    s.add_argument("--out", "-o", help="directory for sweep.csv, per-point results and table.txt")
    s.add_argument("--timing", action="store_true", help="show wall time in the table")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export-lp", help="write the linear model in LP format")
    _add_source(e)
    _add_requirement(e)
    _add_formulation(e)
    _add_limits(e)
    e.add_argument("--out", "-o", help="output .lp file or directory (default: stdout)")
    e.set_defaults(func=cmd_export_lp)

    sc = sub.add_parser("scenario", help="write a case-study offer book as CSV")
    sc.add_argument("name", nargs="?", help=f"one of {', '.join(SCENARIO_NAMES)}")
    sc.add_argument("--list", action="store_true", help="list scenario names")
    sc.add_argument("--out", "-o", help="CSV path (default: stdout)")
    sc.set_defaults(func=cmd_scenario)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "workers", 1) < 1:
            parser.error("--workers must be at least 1")
    except SystemExit as exc:  # usage errors, --help and --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ReserveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
