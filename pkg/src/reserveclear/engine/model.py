"""Problem instances and their mixed-integer row model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import (
    LOG_SLACK,
    InfeasibleInstanceError,
    Offer,
    ReserveError,
    Requirement,
    check_offer_book,
    uniform_block_reliability,
)


class Formulation(str, enum.Enum):
    MINLP_A = "MINLP-A"
    RMINLP_C = "rMINLP-C"
    MILP_D = "MILP-D"
    UNIFORM_E = "Uniform-E"
    CORRELATED_F = "Correlated-F"
    SOURCE_G = "SourceRestricted-G"
    UNAWARE = "UnawareBenchmark"

    @classmethod
    def parse(cls, value: "str | Formulation") -> "Formulation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if key in (member.value.lower(), member.name.lower(), member.value.split("-")[0].lower()):
                return member
        aliases = {"a": cls.MINLP_A, "c": cls.RMINLP_C, "d": cls.MILP_D, "e": cls.UNIFORM_E,
                   "f": cls.CORRELATED_F, "g": cls.SOURCE_G, "unaware": cls.UNAWARE,
                   "benchmark": cls.UNAWARE, "milp": cls.MILP_D, "minlp": cls.MINLP_A,
                   "rminlp": cls.RMINLP_C}
        if key in aliases:
            return aliases[key]
        raise ReserveError(f"unknown formulation {value!r}")

    @property
    def is_linear(self) -> bool:
        return self in LINEAR_FORMULATIONS


LINEAR_FORMULATIONS = frozenset(
    {Formulation.MILP_D, Formulation.UNIFORM_E, Formulation.CORRELATED_F, Formulation.SOURCE_G}
)
EXACT_FORMULATIONS = frozenset({Formulation.MINLP_A, Formulation.RMINLP_C})


@dataclass(frozen=True)
class ProblemInstance:
    """A validated clearing problem.

    ``block_floor`` holds the per-block reliability floor for the linear
    formulations.  ``weights`` are the per-offer multipliers on
    ``ln(1 - R_i)`` (all ones except under a correlation matrix).
    """

    offers: tuple[Offer, ...]
    requirement: Requirement
    formulation: Formulation
    big_m: float
    block_floor: tuple[float, ...] | None = None
    uniform_reliability: float | None = None
    min_offers: tuple[int, ...] | None = None
    correlation: tuple[tuple[float, ...], ...] | None = None
    weights: tuple[float, ...] = ()
    benchmark_threshold: float | None = None
    enforce_system_weighting: bool = False
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_offers(self) -> int:
        return len(self.offers)

    @property
    def n_blocks(self) -> int:
        return self.requirement.block_count

    def weighted_log_unavailability(self) -> np.ndarray:
        """``omega_i * ln(1 - R_i)`` per offer (nonpositive)."""
        logs = np.array([o.log_unavailability for o in self.offers])
        return logs * np.asarray(self.weights, dtype=float)

    def eligible(self, i: int) -> bool:
        if self.formulation is Formulation.UNIFORM_E:
            return self.offers[i].reliability >= self.uniform_reliability
        return True

    def block_lower_volume(self, b: int) -> float:
        """Smallest admissible block volume ``q_b``."""
        lower = self.requirement.min_block_volume
        if self.formulation is Formulation.UNIFORM_E:
            # the volume floor (class reliability x quantity >= block floor) binds accepted offers
            lower = max(lower, self.block_floor[b] / self.uniform_reliability)
        return lower

    @property
    def symmetric_blocks(self) -> bool:
        """Whether blocks are interchangeable (uniform floors and bounds)."""
        if self.block_floor is None:
            return True
        return len(set(self.block_floor)) <= 1 and (
            self.min_offers is None or len(set(self.min_offers)) <= 1
        )

    def source_groups(self) -> dict[str, list[int]]:
        groups: dict[str, list[int]] = {}
        for i, o in enumerate(self.offers):
            groups.setdefault(o.source, []).append(i)
        return groups


def _as_floor(psi, k: int) -> tuple[float, ...]:
    if np.ndim(psi) == 0:
        values = (float(psi),) * k
    else:
        values = tuple(float(p) for p in psi)
        if len(values) != k:
            raise ReserveError(f"expected {k} block floors, got {len(values)}")
    for p in values:
        if not 0.0 < p < 1.0:
            raise ReserveError(f"block reliability floor must lie in (0, 1), got {p!r}")
    return values


def validate_correlation(correlation, n: int) -> np.ndarray:
    """Check a cross-correlation matrix: square, symmetric, unit diagonal, (0, 1]."""
    try:
        gamma = np.asarray(correlation, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ReserveError(f"correlation matrix is not numeric: {exc}") from None
    if gamma.shape != (n, n):
        raise ReserveError(f"correlation matrix must be {n}x{n}, got shape {gamma.shape}")
    if not np.all(np.isfinite(gamma)):
        raise ReserveError("correlation matrix has non-finite entries")
    if np.any(gamma <= 0.0) or np.any(gamma > 1.0):
        raise ReserveError("correlation entries must lie in (0, 1]")
    if not np.allclose(gamma, gamma.T, rtol=0, atol=1e-12):
        raise ReserveError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(gamma), 1.0, rtol=0, atol=1e-12):
        raise ReserveError("correlation matrix must have a unit diagonal")
    return gamma


def correlation_weights(gamma: np.ndarray) -> tuple[float, ...]:
    """``prod_j rho_ij`` for every offer ``i``."""
    return tuple(float(math.prod(row)) for row in np.asarray(gamma, dtype=float))


def min_offers_per_block(block_floor: float, uniform_reliability: float) -> int:
    """Fewest offers of the given class reliability whose horizontal stack reaches ``block_floor``."""
    ratio = math.log1p(-block_floor) / math.log1p(-uniform_reliability)
    # ln(1e-4) / ln(0.1) is 4 up to rounding; do not round it up to 5
    return max(1, math.ceil(ratio - 1e-9 * max(1.0, ratio)))


def build_instance(
    offers: Sequence[Offer],
    requirement: Requirement,
    formulation: "Formulation | str",
    *,
    block_floor=None,
    uniform_reliability: float | None = None,
    correlation=None,
    benchmark_threshold: float | None = None,
    enforce_system_weighting: bool = False,
    check_feasibility: bool = True,
) -> ProblemInstance:
    """Validate inputs and attach the parameters a formulation needs.

    With ``check_feasibility`` (default) instances that cannot be feasible,
    such as a block floor no subset of offers reaches, raise
    :class:`InfeasibleInstanceError` here rather than inside a solver.
    """
    offers = check_offer_book(offers)
    if not offers:
        raise ReserveError("no offers")
    formulation = Formulation.parse(formulation)
    k = requirement.block_count
    big_m = requirement.big_m if requirement.big_m is not None else max(o.volume for o in offers)
    if big_m < max(o.volume for o in offers) - 1e-9:
        raise ReserveError(f"big-M {big_m:g} is below the largest offered volume")
    weights = (1.0,) * len(offers)
    floor = None
    r_b = None
    n_min = None
    gamma_t = None
    warnings: list[str] = []

    if formulation in LINEAR_FORMULATIONS:
        if block_floor is None:
            block_floor = uniform_block_reliability(requirement.target_reliability, k)
        floor = _as_floor(block_floor, k)
        joint = math.fsum(math.log(p) for p in floor)
        if joint < math.log(requirement.target_reliability) - LOG_SLACK:
            raise ReserveError(
                "block floors do not guarantee the system reliability target "
                f"(product {math.exp(joint):.12g} < {requirement.target_reliability:.12g})"
            )

    if formulation is Formulation.CORRELATED_F:
        if correlation is None:
            raise ReserveError("the correlation-adjusted formulation needs a correlation matrix")
        gamma = validate_correlation(correlation, len(offers))
        weights = correlation_weights(gamma)
        gamma_t = tuple(tuple(float(v) for v in row) for row in gamma)

    if formulation is Formulation.SOURCE_G:
        missing = [o.id for o in offers if o.source == "unspecified"]
        if missing:
            raise ReserveError(f"source-restricted clearing needs a source on every offer; missing: {missing}")

    if formulation is Formulation.UNIFORM_E:
        r_b = min(o.reliability for o in offers) if uniform_reliability is None else float(uniform_reliability)
        if not 0.0 < r_b < 1.0:
            raise ReserveError(f"uniform block reliability must lie in (0, 1), got {r_b!r}")
        n_min = tuple(min_offers_per_block(p, r_b) for p in floor)
        warnings.append(
            "accepted quantities must satisfy class reliability x quantity >= block floor, which mixes "
            "megawatts with a probability; applied as written"
        )

    threshold = None
    if formulation is Formulation.UNAWARE:
        threshold = max(o.reliability for o in offers) if benchmark_threshold is None else float(benchmark_threshold)
        if not 0.0 <= threshold < 1.0:
            raise ReserveError(f"benchmark threshold must lie in [0, 1), got {threshold!r}")

    instance = ProblemInstance(
        offers=offers,
        requirement=requirement,
        formulation=formulation,
        big_m=float(big_m),
        block_floor=floor,
        uniform_reliability=r_b,
        min_offers=n_min,
        correlation=gamma_t,
        weights=weights,
        benchmark_threshold=threshold,
        enforce_system_weighting=bool(enforce_system_weighting),
        warnings=tuple(warnings),
    )
    if check_feasibility:
        _check_construction(instance)
    return instance


def _check_construction(inst: ProblemInstance) -> None:
    """Reject instances that no assignment of offers can make feasible."""
    if inst.requirement.target_volume == 0:
        return
    f = inst.formulation
    logs = inst.weighted_log_unavailability()
    if f in (Formulation.MILP_D, Formulation.CORRELATED_F):
        best = math.fsum(logs)
        for b, p in enumerate(inst.block_floor):
            if best > math.log1p(-p) + LOG_SLACK:
                raise InfeasibleInstanceError(
                    f"block floor {p:.12g} unachievable: stacking every offer reaches only "
                    f"{-math.expm1(best):.12g}"
                )
    elif f is Formulation.SOURCE_G:
        best = math.fsum(min(logs[i] for i in idx) for idx in inst.source_groups().values())
        for p in inst.block_floor:
            if best > math.log1p(-p) + LOG_SLACK:
                raise InfeasibleInstanceError(
                    f"block floor {p:.12g} unachievable with one offer per source "
                    f"({len(inst.source_groups())} sources reach {-math.expm1(best):.12g})"
                )
    elif f is Formulation.UNIFORM_E:
        count = sum(1 for i in range(inst.n_offers) if inst.eligible(i))
        for n in inst.min_offers:
            if n > count:
                raise InfeasibleInstanceError(
                    f"each block needs {n} offers with reliability >= {inst.uniform_reliability:g}, "
                    f"only {count} exist"
                )
    elif f in EXACT_FORMULATIONS:
        best_block = -math.expm1(math.fsum(logs))
        if best_block <= 0 or inst.n_blocks * math.log(best_block) < math.log(
            inst.requirement.target_reliability
        ) - LOG_SLACK:
            raise InfeasibleInstanceError(
                "system reliability target unachievable even with every offer in every block"
            )
    if f is not Formulation.UNAWARE:
        k = inst.n_blocks
        if max(o.volume for o in inst.offers) < max(inst.block_lower_volume(b) for b in range(k)) - 1e-9:
            raise InfeasibleInstanceError("no offer is large enough for the minimum block volume")


def build_source_restricted(instance: ProblemInstance, *, check_feasibility: bool = True) -> ProblemInstance:
    """Derive the variant allowing at most one offer per source in each block."""
    return build_instance(
        instance.offers,
        instance.requirement,
        Formulation.SOURCE_G,
        block_floor=instance.block_floor,
        check_feasibility=check_feasibility,
    )


def build_correlation_adjusted(
    instance: ProblemInstance,
    correlation,
    *,
    enforce_system_weighting: bool = False,
    check_feasibility: bool = True,
) -> ProblemInstance:
    """Derive the variant whose reliability terms are weighted by ``prod_j rho_ij``."""
    return build_instance(
        instance.offers,
        instance.requirement,
        Formulation.CORRELATED_F,
        block_floor=instance.block_floor,
        correlation=correlation,
        enforce_system_weighting=enforce_system_weighting,
        check_feasibility=check_feasibility,
    )


def with_formulation(instance: ProblemInstance, formulation: "Formulation | str", **params) -> ProblemInstance:
    return build_instance(instance.offers, instance.requirement, formulation, **params)


# --------------------------------------------------------------------------
# row model


@dataclass
class MilpModel:
    """Dense row model ``row_lo <= A x <= row_hi``, ``lo <= x <= hi``.

    Columns are ``z[i, b]`` (acceptance), ``y[i, b]`` (offer quantity in a
    block) and ``q[b]`` (block volume).
    """

    var_names: list[str]
    c: np.ndarray
    A: np.ndarray
    row_names: list[str]
    row_lo: np.ndarray
    row_hi: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    binary: np.ndarray
    z_col: np.ndarray  # (n, k) column index of z
    y_col: np.ndarray
    q_col: np.ndarray
    rel_rows: np.ndarray  # (k,) row index of reliability rows, -1 if absent
    comments: list[str] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


def build_milp(
    inst: ProblemInstance,
    *,
    tighten: bool = False,
    exact_floor: float | None = None,
) -> MilpModel:
    """Assemble the linear model of ``inst``.

    ``tighten`` adds the valid inequalities used by the search (quantity of
    an accepted offer at least the block's lower volume, no empty block).
    Exact formulations have no linear reliability row; for search purposes
    ``exact_floor`` supplies a per-block floor implied by the system target.
    """
    f = inst.formulation
    if f not in LINEAR_FORMULATIONS and exact_floor is None:
        raise ReserveError(
            f"{f.value} has nonlinear reliability constraints; linear alternatives are "
            + ", ".join(sorted(x.value for x in LINEAR_FORMULATIONS))
        )
    n, k = inst.n_offers, inst.n_blocks
    req = inst.requirement
    M = inst.big_m
    z_col = np.arange(n * k).reshape(n, k)
    y_col = n * k + np.arange(n * k).reshape(n, k)
    q_col = 2 * n * k + np.arange(k)
    nv = 2 * n * k + k
    names = [""] * nv
    lo = np.zeros(nv)
    hi = np.zeros(nv)
    c = np.zeros(nv)
    binary = np.zeros(nv, dtype=bool)
    for i, o in enumerate(inst.offers):
        for b in range(k):
            names[z_col[i, b]] = f"z_{i + 1}_{b + 1}"
            names[y_col[i, b]] = f"y_{i + 1}_{b + 1}"
            hi[z_col[i, b]] = 1.0 if inst.eligible(i) else 0.0
            binary[z_col[i, b]] = True
            hi[y_col[i, b]] = o.volume
            c[y_col[i, b]] = o.price
    for b in range(k):
        names[q_col[b]] = f"q_{b + 1}"
        lo[q_col[b]] = inst.block_lower_volume(b)
        hi[q_col[b]] = M

    rows: list[tuple[str, dict[int, float], float, float]] = []
    for i in range(n):
        for b in range(k):
            rows.append((f"bigm_{i + 1}_{b + 1}", {q_col[b]: 1.0, y_col[i, b]: -1.0, z_col[i, b]: M}, -np.inf, M))
    for i, o in enumerate(inst.offers):
        rows.append((f"cap_{i + 1}", {y_col[i, b]: 1.0 for b in range(k)}, -np.inf, o.volume))
    rows.append(("volume", {q_col[b]: 1.0 for b in range(k)}, req.target_volume, np.inf))

    rel_rows = np.full(k, -1)
    logs = inst.weighted_log_unavailability()
    if f in (Formulation.MILP_D, Formulation.CORRELATED_F, Formulation.SOURCE_G) or exact_floor is not None:
        for b in range(k):
            floor = exact_floor if exact_floor is not None else inst.block_floor[b]
            rel_rows[b] = len(rows)
            coeffs = {z_col[i, b]: float(logs[i]) for i in range(n) if logs[i] != 0.0}
            rows.append((f"rel_{b + 1}", coeffs, -np.inf, math.log1p(-floor)))
    if f is Formulation.SOURCE_G:
        for s, idx in sorted(inst.source_groups().items()):
            if len(idx) < 2:
                continue
            tag = "".join(ch if ch.isalnum() else "_" for ch in s)
            for b in range(k):
                rows.append((f"src_{tag}_{b + 1}", {z_col[i, b]: 1.0 for i in idx}, -np.inf, 1.0))
    if f is Formulation.UNIFORM_E:
        for b in range(k):
            rows.append((f"count_{b + 1}", {z_col[i, b]: 1.0 for i in range(n)}, float(inst.min_offers[b]), np.inf))
        r_b = inst.uniform_reliability
        for i in range(n):
            for b in range(k):
                rows.append(
                    (f"nonzero_{i + 1}_{b + 1}", {y_col[i, b]: r_b, z_col[i, b]: -1.0},
                     inst.block_floor[b] - 1.0, np.inf)
                )
    if tighten:
        for b in range(k):
            low = inst.block_lower_volume(b)
            if low > 0:
                for i in range(n):
                    rows.append((f"lbq_{i + 1}_{b + 1}", {y_col[i, b]: 1.0, z_col[i, b]: -low}, 0.0, np.inf))
            rows.append((f"nonempty_{b + 1}", {z_col[i, b]: 1.0 for i in range(n)}, 1.0, np.inf))

    A = np.zeros((len(rows), nv))
    row_lo = np.empty(len(rows))
    row_hi = np.empty(len(rows))
    for r, (_, coeffs, rl, rh) in enumerate(rows):
        for j, v in coeffs.items():
            A[r, j] = v
        row_lo[r] = rl
        row_hi[r] = rh
    comments = [f"offer {i + 1} = {o.id}" for i, o in enumerate(inst.offers)]
    return MilpModel(
        var_names=names,
        c=c,
        A=A,
        row_names=[r[0] for r in rows],
        row_lo=row_lo,
        row_hi=row_hi,
        lo=lo,
        hi=hi,
        binary=binary,
        z_col=z_col,
        y_col=y_col,
        q_col=q_col,
        rel_rows=rel_rows,
        comments=comments,
    )


__all__ = [
    "Formulation",
    "LINEAR_FORMULATIONS",
    "EXACT_FORMULATIONS",
    "ProblemInstance",
    "MilpModel",
    "build_instance",
    "build_source_restricted",
    "build_correlation_adjusted",
    "build_milp",
    "correlation_weights",
    "min_offers_per_block",
    "validate_correlation",
    "with_formulation",
]
