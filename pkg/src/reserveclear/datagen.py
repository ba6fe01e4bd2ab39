"""Synthetic offer books: price-versus-reliability curves and case-study scenarios."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .core import Offer, ReserveError, Requirement

CURVE_KINDS = ("constant", "linear", "exponential", "quadratic", "cubic", "logarithmic")


@dataclass(frozen=True)
class CostCurve:
    """Price per MW as a function of reliability, scaled by ``scale``."""

    kind: str = "linear"
    scale: float = 100.0

    def __post_init__(self) -> None:
        if self.kind not in CURVE_KINDS:
            raise ReserveError(f"unknown cost curve {self.kind!r}; choose from {', '.join(CURVE_KINDS)}")
        if not self.scale >= 0:
            raise ReserveError(f"curve scale must be nonnegative, got {self.scale!r}")


def price(curve: CostCurve, reliability: float) -> float:
    r = float(reliability)
    if not 0.0 <= r < 1.0:
        raise ReserveError(f"reliability must lie in [0, 1), got {reliability!r}")
    a = curve.scale
    kind = curve.kind
    if kind == "constant":
        return a
    if kind == "linear":
        return a * r
    if kind == "exponential":
        return a * math.expm1(r) / (math.e - 1.0)
    if kind == "quadratic":
        return a * r * r
    if kind == "cubic":
        return a * r**3
    # logarithmic: nonnegative, close to the scale near R = 0.9999
    return -a / 9.0 * math.log1p(-r)


def grid_offer_book(reliability_grid: Iterable[float], volume: float, curve: CostCurve) -> list[Offer]:
    """One offer per grid point, numbered from 1 in grid order."""
    return [
        Offer(str(j), volume, price(curve, r), r)
        for j, r in enumerate(reliability_grid, start=1)
    ]


def percent_grid() -> list[float]:
    """Reliabilities 0.01, 0.02, ..., 0.99."""
    return [k / 100 for k in range(1, 100)]


# --------------------------------------------------------------------------
# scenarios

LARGE_VOLUME = 500.0
LARGE_TARGET = 0.9995
LARGE_BLOCK = 100.0
BLOCK_SWEEP_SIZES = (500.0, 250.0, 100.0, 50.0)
COST_SWEEP_CURVES = ("linear", "exponential", "quadratic", "cubic", "logarithmic")


def _motivating():
    rows = [("1", 100, 100, 0.99), ("2", 100, 55, 0.98), ("3", 100, 40, 0.95),
            ("4", 100, 25, 0.90), ("5", 100, 11, 0.70), ("6", 100, 10, 0.70)]
    offers = [Offer(i, v, p, r) for i, v, p, r in rows]
    return offers, Requirement(100.0, 0.99)


def _small_case():
    # two identical 20 MW offers at 0.99, kept distinct as 5a and 5b
    rows = [("1", 40, 80, 0.80), ("2", 30, 90, 0.90), ("3", 30, 95, 0.95),
            ("4", 30, 98, 0.98), ("5a", 20, 99, 0.99), ("5b", 20, 99, 0.99)]
    offers = [Offer(i, v, p, r) for i, v, p, r in rows]
    return offers, Requirement.with_min_bid(40.0, 0.9995, 20.0, min_block_volume=20.0)


def _large_case(block_size: float = LARGE_BLOCK, curve: str = "linear"):
    offers = grid_offer_book(percent_grid(), LARGE_VOLUME, CostCurve(curve))
    req = Requirement.with_min_bid(LARGE_VOLUME, LARGE_TARGET, block_size, min_block_volume=block_size)
    return offers, req


SCENARIO_NAMES = ("motivating", "small-case", "large-case", "block-sweep(size)", "cost-sweep(curve)")
_PARAM = re.compile(r"^(block-sweep|cost-sweep)\((.+)\)$")


def scenario(name: str) -> tuple[list[Offer], Requirement]:
    """Offer book and requirement of a named case study.

    ``block-sweep(<MW>)`` is the large case with blocks of the given size;
    ``cost-sweep(<curve>)`` is the large case priced by another curve.
    """
    key = name.strip().lower()
    if key == "motivating":
        return _motivating()
    if key == "small-case":
        return _small_case()
    if key == "large-case":
        return _large_case()
    m = _PARAM.match(key)
    if m:
        kind, arg = m.groups()
        if kind == "block-sweep":
            try:
                size = float(arg)
            except ValueError:
                raise ReserveError(f"block size must be a number, got {arg!r}") from None
            if not size > 0:
                raise ReserveError(f"block size must be positive, got {arg!r}")
            return _large_case(block_size=size)
        return _large_case(curve=CostCurve(arg).kind)
    raise ReserveError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")


def write_offer_book(offers: Iterable[Offer], path: str | Path) -> None:
    """Write offers in the CSV format read by :func:`reserveclear.io.read_offers`."""
    from .io import write_offers_csv

    write_offers_csv(offers, path)


__all__ = [
    "BLOCK_SWEEP_SIZES",
    "COST_SWEEP_CURVES",
    "CURVE_KINDS",
    "CostCurve",
    "SCENARIO_NAMES",
    "grid_offer_book",
    "percent_grid",
    "price",
    "scenario",
    "write_offer_book",
]
