"""Ex-post delivery probabilities of cleared portfolios.

A portfolio is a list of ``(volume, reliability)`` or
``(volume, reliability, source)`` entries, one per offer, where volume is
everything the offer supplies across blocks.  An available offer delivers
its full volume, an unavailable one nothing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AvailabilityDistribution, ClearingResult, Offer, ReserveError

MAX_EXACT_OFFERS = 30
MC_CHUNK = 1 << 16
_VOLUME_DIGITS = 9

INDEPENDENCE = "independence"
COMMON_SOURCE = "common-source"


@dataclass(frozen=True)
class AvailabilityModel:
    """How offer outages are related.

    ``independence``: every offer is its own Bernoulli(R_i).
    ``common-source``: each source draws a shared shock that succeeds with
    probability ``shock[source]`` (sources not listed never fail); an offer
    is available when its source's shock and its own idiosyncratic draw
    with probability ``R_i / shock`` both succeed, which keeps the marginal
    at ``R_i``.
    """

    kind: str = INDEPENDENCE
    shock: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in (INDEPENDENCE, COMMON_SOURCE):
            raise ReserveError(f"unknown availability model {self.kind!r}")
        for s, p in self.shock.items():
            if not 0.0 < p <= 1.0:
                raise ReserveError(f"shock probability for source {s!r} must lie in (0, 1], got {p!r}")

    @classmethod
    def common_source(cls, shock: Mapping[str, float]) -> "AvailabilityModel":
        return cls(COMMON_SOURCE, dict(shock))

    def shock_of(self, source: str) -> float:
        return float(self.shock.get(source, 1.0)) if self.kind == COMMON_SOURCE else 1.0


def _normalise(portfolio: Iterable[Sequence]) -> list[tuple[float, float, str]]:
    out = []
    for entry in portfolio:
        if len(entry) == 2:
            volume, rel = entry
            source = "unspecified"
        else:
            volume, rel, source = entry[:3]
        volume, rel = float(volume), float(rel)
        if volume < 0 or not math.isfinite(volume):
            raise ReserveError(f"portfolio volume must be a nonnegative number, got {volume!r}")
        if not 0.0 <= rel <= 1.0:
            raise ReserveError(f"reliability must lie in [0, 1], got {rel!r}")
        out.append((volume, rel, str(source)))
    return out


def _convolve(entries: Sequence[tuple[float, float]]) -> dict[float, float]:
    """Distribution of the sum of independent two-point variables (v w.p. p, else 0)."""
    dist = {0.0: 1.0}
    for volume, p in entries:
        nxt: dict[float, float] = {}
        for v, mass in dist.items():
            up = round(v + volume, _VOLUME_DIGITS)
            nxt[up] = nxt.get(up, 0.0) + mass * p
            nxt[v] = nxt.get(v, 0.0) + mass * (1.0 - p)
        dist = {v: m for v, m in nxt.items() if m > 0.0}
    return dist


def _check_marginals(entries, model: AvailabilityModel) -> None:
    for volume, rel, source in entries:
        s = model.shock_of(source)
        if rel > s + 1e-12:
            raise ReserveError(
                f"reliability {rel:g} exceeds the shock probability {s:g} of source {source!r}; "
                "the marginal cannot be reproduced"
            )


def exact_distribution(
    portfolio: Iterable[Sequence],
    model: AvailabilityModel | str = INDEPENDENCE,
    max_offers: int = MAX_EXACT_OFFERS,
) -> AvailabilityDistribution:
    """Exact probability mass over the total deliverable volume."""
    if isinstance(model, str):
        model = AvailabilityModel(model)
    entries = _normalise(portfolio)
    if len(entries) > max_offers:
        raise ReserveError(f"exact distribution limited to {max_offers} offers, got {len(entries)}")
    if model.kind == INDEPENDENCE:
        dist = _convolve([(v, r) for v, r, _ in entries])
    else:
        _check_marginals(entries, model)
        by_source: dict[str, list[tuple[float, float]]] = {}
        for v, r, s in entries:
            by_source.setdefault(s, []).append((v, r))
        dist = {0.0: 1.0}
        # sources are independent of each other; within a source, condition on the shock
        for s in sorted(by_source):
            shock = model.shock_of(s)
            inner = _convolve([(v, r / shock) for v, r in by_source[s]])
            part: dict[float, float] = {0.0: 1.0 - shock}
            for v, m in inner.items():
                part[v] = part.get(v, 0.0) + shock * m
            merged: dict[float, float] = {}
            for v1, m1 in dist.items():
                for v2, m2 in part.items():
                    key = round(v1 + v2, _VOLUME_DIGITS)
                    merged[key] = merged.get(key, 0.0) + m1 * m2
            dist = {v: m for v, m in merged.items() if m > 0.0}
    support = tuple(sorted(dist.items()))
    return AvailabilityDistribution(support, model.kind)


def result_portfolio(result: ClearingResult, offers: Sequence[Offer] | None = None) -> list[tuple[float, float, str]]:
    """Per-offer ``(total quantity, reliability, source)`` of a cleared result."""
    sources = {o.id: o.source for o in offers} if offers is not None else {}
    volume: dict[str, float] = {}
    rel: dict[str, float] = {}
    for a in result.assignments:
        for m in a.accepted:
            volume[m.offer_id] = volume.get(m.offer_id, 0.0) + m.quantity
            rel[m.offer_id] = m.reliability
    return [(volume[i], rel[i], sources.get(i, "unspecified")) for i in volume]


def monte_carlo(
    portfolio: Iterable[Sequence],
    model: AvailabilityModel | str = INDEPENDENCE,
    target_volume: float = 0.0,
    samples: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
) -> tuple[float, float]:
    """Estimate P(deliverable volume >= target) and its 95% halfwidth.

    Samples are drawn in fixed-size chunks, each from its own Philox stream
    spawned from ``seed``, so the estimate is the same for any ``workers``.
    """
    if isinstance(model, str):
        model = AvailabilityModel(model)
    if samples < 1:
        raise ReserveError("samples must be at least 1")
    entries = _normalise(portfolio)
    if model.kind == COMMON_SOURCE:
        _check_marginals(entries, model)
    volumes = np.array([v for v, _, _ in entries])
    rels = np.array([r for _, r, _ in entries])
    labels = sorted({s for _, _, s in entries})
    src_idx = np.array([labels.index(s) for _, _, s in entries], dtype=int)
    shocks = np.array([model.shock_of(s) for s in labels])
    idio = rels / shocks[src_idx] if entries else rels
    need = float(target_volume) - 1e-9 * max(1.0, abs(float(target_volume)))

    n_chunks = -(-samples // MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)

    def run(j: int) -> int:
        size = min(MC_CHUNK, samples - j * MC_CHUNK)
        rng = np.random.Generator(np.random.Philox(seeds[j]))
        up = rng.random((size, len(entries))) < idio
        if model.kind == COMMON_SOURCE:
            shock_up = rng.random((size, len(labels))) < shocks
            up &= shock_up[:, src_idx]
        delivered = up.astype(float) @ volumes if len(entries) else np.zeros(size)
        return int(np.count_nonzero(delivered >= need))

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, range(n_chunks)))
    else:
        hits = sum(run(j) for j in range(n_chunks))
    p = hits / samples
    return p, 1.96 * math.sqrt(p * (1.0 - p) / samples)


def delivery_probability(
    result: ClearingResult,
    target_volume: float | None = None,
    model: AvailabilityModel | str = INDEPENDENCE,
    *,
    offers: Sequence[Offer] | None = None,
    samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """P(deliverable volume >= target) for a cleared portfolio.

    ``target_volume`` defaults to the procured volume.  ``offers`` supplies
    source tags for the common-source model.  Exact when the portfolio has
    at most :data:`MAX_EXACT_OFFERS` offers, sampled otherwise.
    """
    portfolio = result_portfolio(result, offers)
    target = result.procured_volume if target_volume is None else float(target_volume)
    if target <= 0:
        return 1.0
    if len(portfolio) <= MAX_EXACT_OFFERS:
        return exact_distribution(portfolio, model).prob_at_least(target)
    return monte_carlo(portfolio, model, target, samples, seed)[0]


__all__ = [
    "AvailabilityModel",
    "COMMON_SOURCE",
    "INDEPENDENCE",
    "MAX_EXACT_OFFERS",
    "delivery_probability",
    "exact_distribution",
    "monte_carlo",
    "result_portfolio",
]
