"""Reading and writing the row model in CPLEX LP text format.

Coefficients are written with ``repr`` so that a written file parses back to
exactly the same floats.  Offers are numbered from 1 in book order; a header
comment maps each number to its offer id.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import ReserveError
from .model import MilpModel, ProblemInstance, build_milp

_LINE_WIDTH = 240


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _expression(coeffs: list[tuple[float, str]]) -> str:
    parts = []
    for j, (a, name) in enumerate(coeffs):
        sign = "-" if a < 0 else "+"
        if j == 0:
            parts.append(f"{'- ' if a < 0 else ''}{_num(abs(a))} {name}")
        else:
            parts.append(f"{sign} {_num(abs(a))} {name}")
    return " ".join(parts)


def _wrap(text: str) -> list[str]:
    """Break a long row at term boundaries; continuation lines start with a space."""
    lines, current = [], ""
    for token in text.split(" "):
        if current and len(current) + 1 + len(token) > _LINE_WIDTH and token in "+-":
            lines.append(current)
            current = "   " + token
        else:
            current = f"{current} {token}" if current else token
    lines.append(current)
    return [" " + line if not line.startswith(" ") else line for line in lines]


def model_to_lp(model: MilpModel, title: str = "reserve clearing") -> str:
    out = [f"\\ {title}"]
    out += [f"\\ {c}" for c in model.comments]
    out.append("Minimize")
    obj = [(float(model.c[j]), model.var_names[j]) for j in np.flatnonzero(model.c)]
    out += _wrap("obj: " + (_expression(obj) if obj else "0 " + model.var_names[0]))
    out.append("Subject To")
    for r, name in enumerate(model.row_names):
        row = model.A[r]
        coeffs = [(float(row[j]), model.var_names[j]) for j in np.flatnonzero(row)]
        lo, hi = float(model.row_lo[r]), float(model.row_hi[r])
        expr = _expression(coeffs)
        if lo == hi:
            out += _wrap(f"{name}: {expr} = {_num(hi)}")
            continue
        if math.isfinite(lo) and math.isfinite(hi):
            out += _wrap(f"{name}_lo: {expr} >= {_num(lo)}")
            out += _wrap(f"{name}_hi: {expr} <= {_num(hi)}")
        elif math.isfinite(hi):
            out += _wrap(f"{name}: {expr} <= {_num(hi)}")
        elif math.isfinite(lo):
            out += _wrap(f"{name}: {expr} >= {_num(lo)}")
    out.append("Bounds")
    for j, name in enumerate(model.var_names):
        lo, hi = float(model.lo[j]), float(model.hi[j])
        if model.binary[j]:
            if hi == 0.0:
                out.append(f" {name} = 0.0")
            continue
        if lo == hi:
            out.append(f" {name} = {_num(lo)}")
        elif math.isinf(hi):
            out.append(f" {name} >= {_num(lo)}")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    out.append("Binaries")
    binaries = [model.var_names[j] for j in np.flatnonzero(model.binary)]
    line = ""
    for name in binaries:
        if len(line) + len(name) + 1 > _LINE_WIDTH:
            out.append(line)
            line = ""
        line += " " + name
    if line:
        out.append(line)
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(instance: ProblemInstance, path: str | Path | None = None, title: str | None = None) -> str:
    """Write the instance's linear model; returns the text.

    Only formulations with linear reliability rows can be exported; the
    model is written without the search-only tightening rows.
    """
    model = build_milp(instance)
    text = model_to_lp(model, title or f"{instance.formulation.value} reserve clearing")
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# parsing


@dataclass
class ParsedLp:
    objective: dict[str, float]
    rows: dict[str, tuple[dict[str, float], str, float]]  # name -> (coeffs, sense, rhs)
    bounds: dict[str, tuple[float, float]]
    binaries: list[str]


_TERM = re.compile(r"([+-]?)\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf)\s+([A-Za-z_]\w*)")


def _parse_terms(text: str) -> dict[str, float]:
    coeffs: dict[str, float] = {}
    for sign, value, name in _TERM.findall(text):
        coeffs[name] = -float(value) if sign == "-" else float(value)
    return coeffs


def parse_lp(text: str) -> ParsedLp:
    """Parse the subset of LP format that :func:`model_to_lp` writes."""
    section = None
    logical: list[tuple[str, str]] = []
    for raw in text.splitlines():
        if raw.startswith("\\") or not raw.strip():
            continue
        head = raw.strip()
        if head in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
            section = head
            continue
        if raw.startswith("   ") and logical:
            logical[-1] = (logical[-1][0], logical[-1][1] + " " + head)
        else:
            logical.append((section, head))

    objective: dict[str, float] = {}
    rows: dict[str, tuple[dict[str, float], str, float]] = {}
    bounds: dict[str, tuple[float, float]] = {}
    binaries: list[str] = []
    for section, line in logical:
        if section == "Minimize":
            objective = _parse_terms(line.split(":", 1)[1])
        elif section == "Subject To":
            name, body = line.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)\s*$", body)
            if not m:
                raise ReserveError(f"cannot parse constraint {line!r}")
            rows[name.strip()] = (_parse_terms(m.group(1)), m.group(2), float(m.group(3)))
        elif section == "Bounds":
            parts = line.split()
            if len(parts) == 5:
                bounds[parts[2]] = (float(parts[0]), float(parts[4]))
            elif parts[1] == "=":
                bounds[parts[0]] = (float(parts[2]),) * 2
            elif parts[1] == ">=":
                bounds[parts[0]] = (float(parts[2]), math.inf)
            else:
                raise ReserveError(f"cannot parse bound {line!r}")
        elif section == "Binaries":
            binaries.extend(line.split())
    return ParsedLp(objective, rows, bounds, binaries)
