"""Shared test corpus: random small instances and an independent brute-force oracle.

The oracle shares no code with the package solvers: it enumerates every
acceptance pattern with itertools, checks reliability by direct products
of probabilities, and solves the remaining block-volume LP with scipy.
"""

from __future__ import annotations

import itertools
import math
import random

import numpy as np
from scipy.optimize import linprog

from reserveclear.core import Offer, Requirement

CURVES = {
    "linear": lambda r: 100 * r,
    "cubic": lambda r: 100 * r**3,
    "exponential": lambda r: 100 * math.expm1(r) / (math.e - 1),
    "logarithmic": lambda r: -100 / 9 * math.log1p(-r),
}


def random_offers(rng: random.Random, n: int, curve: str | None = None) -> list[Offer]:
    offers = []
    for i in range(n):
        r = round(rng.uniform(0.5, 0.995), 3)
        kind = curve or rng.choice(sorted(CURVES))
        p = round(CURVES[kind](r) * rng.uniform(0.8, 1.2), 2)
        offers.append(Offer(str(i), rng.choice([10, 20, 30, 40, 50]), p, r, source=rng.choice("abc")))
    return offers


def random_case(seed: int, max_offers: int = 6, max_blocks: int = 3):
    """(offers, requirement) with 2..max_offers offers and 1..max_blocks blocks."""
    rng = random.Random(seed)
    n = rng.randint(2, max_offers)
    k = rng.randint(1, max_blocks)
    offers = random_offers(rng, n)
    q = rng.choice([20, 40, 60])
    phi = rng.choice([0.8, 0.9, 0.95, 0.99])
    bmin = rng.choice([0, 10, q / k])
    return offers, Requirement(q, phi, min_block_volume=bmin, block_count=k)


def _stack(rels) -> float:
    return 1.0 - math.prod(1.0 - r for r in rels)


def _block_lp(offers, req, sets):
    k = len(sets)
    c = [sum(offers[i].price for i in s) for s in sets]
    A = [[-1.0] * k]
    b = [-req.target_volume]
    for i, o in enumerate(offers):
        row = [1.0 if i in s else 0.0 for s in sets]
        if any(row):
            A.append(row)
            b.append(o.volume)
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(req.min_block_volume, None)] * k, method="highs")
    return float(res.fun) if res.status == 0 else None


def brute_force(offers, req, mode: str, floor: float | None = None):
    """Optimal cost by exhaustive search, or None when infeasible.

    ``mode`` is ``"exact"`` (joint product of block reliabilities reaches the
    target) or ``"floor"`` (every block reaches ``floor``, default the
    uniform split of the target).  Blocks must be nonempty.
    """
    n, k = len(offers), req.block_count
    target = req.target_reliability
    if floor is None:
        floor = target ** (1.0 / k)
    subsets = [s for size in range(1, n + 1) for s in itertools.combinations(range(n), size)]
    rel = {s: _stack([offers[i].reliability for i in s]) for s in subsets}
    best = None
    for sets in itertools.combinations_with_replacement(subsets, k):
        if mode == "exact":
            joint = math.prod(rel[s] for s in sets)
            if math.log(joint) < math.log(target) - 1e-9:
                continue
        else:
            if any(math.log1p(-rel[s]) > math.log1p(-floor) + 1e-9 for s in sets):
                continue
        cost = _block_lp(offers, req, sets)
        if cost is not None and (best is None or cost < best - 1e-9):
            best = cost
    return best


def random_lp(rng: np.random.Generator, m: int, n: int):
    """Random bounded LP in ``row_lo <= A x <= row_hi``, ``lo <= x <= hi`` form."""
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    x0 = rng.uniform(-2, 2, size=n)
    act = A @ x0
    row_lo = np.where(rng.random(m) < 0.5, act - rng.uniform(0, 3, m), -np.inf)
    row_hi = np.where(rng.random(m) < 0.7, act + rng.uniform(0, 3, m), np.inf)
    lo = np.where(rng.random(n) < 0.8, x0 - rng.uniform(0, 3, n), -np.inf)
    hi = np.where(rng.random(n) < 0.8, x0 + rng.uniform(0, 3, n), np.inf)
    c = rng.integers(-5, 6, size=n).astype(float)
    return c, A, row_lo, row_hi, lo, hi
