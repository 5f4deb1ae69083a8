"""Repeatability / reproducibility statistics and tolerance limits.

Buffer values from one image are decomposed into within-operator (replicate)
variance and between-operator variance by a per-parcel one-way operator
analysis, pooled over parcels. From the two standard deviations the module
derives the 95% repeatability and reproducibility limits and the critical
difference of a replicated mean to the reference value.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .campaign import BufferRecord, partition_by_image
from .errors import InsufficientDataError, PrecisionDomainError

#: Conventional shortcut for 1.96·√2 when comparing two results at 95%.
RULE_OF_THUMB_FACTOR = 2.8


class LimitMode(enum.Enum):
    EXACT = "exact"
    RULE_OF_THUMB = "rule_of_thumb"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class VarianceComponents:
    """Pooled within-operator, between-operator and combined SDs."""

    sd_repeatability: float
    sd_between_operators: float
    sd_reproducibility: float
    df_within: int
    df_between: int
    mean_replicates: float
    operator_count: int


def variance_components(records: Sequence[BufferRecord]) -> VarianceComponents:
    """Estimate repeatability and reproducibility SDs from one image's records.

    Outlier-flagged records are excluded. Within each parcel the operators
    form a one-way layout: the replicate variance is pooled over all
    (parcel, operator) cells weighted by degrees of freedom, and the
    between-operator mean square is pooled over parcels the same way. The
    between-operator variance component uses the df-weighted unbalanced
    average replicate count and is clamped at zero, so the reproducibility
    SD can never fall below the repeatability SD.
    """
    kept = [r for r in records if not r.outlier]
    cells: dict[tuple[str, str], list[float]] = {}
    for rec in kept:
        cells.setdefault((rec.parcel_id, rec.operator_id), []).append(rec.buffer_m)
    operators = {op for (_, op) in cells}
    if len(operators) < 2:
        raise InsufficientDataError(f"need at least 2 operators, found {len(operators)}")

    ss_within = 0.0
    df_within = 0
    for values in cells.values():
        if len(values) > 1:
            ss_within += (len(values) - 1) * float(np.var(values, ddof=1))
            df_within += len(values) - 1
    if df_within == 0:
        raise InsufficientDataError("every (parcel, operator) cell is a singleton; repeatability undefined")
    var_r = ss_within / df_within

    parcels: dict[str, list[list[float]]] = {}
    for (parcel_id, _), values in cells.items():
        parcels.setdefault(parcel_id, []).append(values)
    ss_between = 0.0
    df_between = 0
    nbar_weighted = 0.0
    for groups in parcels.values():
        p = len(groups)
        if p < 2:
            continue
        sizes = np.array([len(g) for g in groups], dtype=float)
        means = np.array([np.mean(g) for g in groups])
        total = sizes.sum()
        grand = float(np.dot(sizes, means) / total)
        ss_between += float(np.dot(sizes, (means - grand) ** 2))
        df_between += p - 1
        # unbalanced-correct average replicate count for this parcel
        nbar_weighted += total - float((sizes**2).sum()) / total
    if df_between == 0:
        var_between = 0.0
    else:
        ms_between = ss_between / df_between
        nbar = nbar_weighted / df_between
        var_between = max(0.0, (ms_between - var_r) / nbar)
    return VarianceComponents(
        sd_repeatability=float(np.sqrt(var_r)),
        sd_between_operators=float(np.sqrt(var_between)),
        sd_reproducibility=float(np.sqrt(var_r + var_between)),
        df_within=df_within,
        df_between=df_between,
        mean_replicates=(nbar_weighted / df_between) if df_between else float("nan"),
        operator_count=len(operators),
    )


def _limit(sd: float, prob: float, n: int, mode: LimitMode) -> float:
    if sd < 0:
        raise PrecisionDomainError(f"standard deviation must be non-negative, got {sd}")
    if mode is LimitMode.RULE_OF_THUMB:
        return RULE_OF_THUMB_FACTOR * sd
    if not 0 < prob < 1:
        raise PrecisionDomainError(f"probability must be in (0, 1), got {prob}")
    if n < 2:
        raise PrecisionDomainError(f"a limit compares at least 2 results, got n={n}")
    z = float(stats.norm.ppf(0.5 + prob / 2))
    return z * sd * float(np.sqrt(n))


def reproducibility_limit(
    sd_reproducibility: float,
    prob: float = 0.95,
    n: int = 2,
    mode: LimitMode = LimitMode.RULE_OF_THUMB,
) -> float:
    """Bound on |difference of two results| across operators.

    ``exact`` gives z(prob)·sd·√n (1.96·√2 ≈ 2.77 at 95%, n=2); the
    conventional rule of thumb rounds the factor up to 2.8.
    """
    return _limit(sd_reproducibility, prob, n, mode)


def repeatability_limit(
    sd_repeatability: float,
    prob: float = 0.95,
    n: int = 2,
    mode: LimitMode = LimitMode.RULE_OF_THUMB,
) -> float:
    """Bound on |difference of two results| by one operator; same form as
    the reproducibility limit, applied to the repeatability SD."""
    return _limit(sd_repeatability, prob, n, mode)


def critical_difference(
    sd_reproducibility: float,
    sd_repeatability: float,
    operator_count: int,
    replicate_counts: Sequence[float],
) -> float:
    """95% bound on |mean of replicated measurements − reference value|.

    CD = (1/√(2p)) · √[ (2.8·sd_R)² − (2.8·sd_r)²·(1 − (1/p)·Σ 1/nᵢ) ]

    with p operators and nᵢ replicates for operator i. Raises
    PrecisionDomainError (carrying both squared terms) when the radicand is
    negative, which signals inconsistent SD inputs.
    """
    p = operator_count
    if p < 1:
        raise PrecisionDomainError(f"operator count must be >= 1, got {p}")
    n_i = np.asarray(replicate_counts, dtype=float)
    if n_i.size != p:
        raise PrecisionDomainError(f"{n_i.size} replicate counts for {p} operators")
    if (n_i < 1).any():
        raise PrecisionDomainError("replicate counts must all be >= 1")
    term_R = (RULE_OF_THUMB_FACTOR * sd_reproducibility) ** 2
    term_r = (RULE_OF_THUMB_FACTOR * sd_repeatability) ** 2 * (1.0 - (1.0 / p) * float((1.0 / n_i).sum()))
    radicand = term_R - term_r
    if radicand < 0:
        raise PrecisionDomainError(
            f"negative radicand: reproducibility term {term_R:.6g} < repeatability term {term_r:.6g}",
            term_reproducibility=term_R,
            term_repeatability=term_r,
        )
    return float(np.sqrt(radicand) / np.sqrt(2.0 * p))


@dataclass(frozen=True)
class PrecisionSummary:
    """Per-image precision figures: bias, SDs, limits, critical difference."""

    image_id: str
    bias: float
    sd_repeatability: float
    repeatability_limit: float
    sd_reproducibility: float
    reproducibility_limit: float
    critical_difference: float
    operator_count: int
    replicate_counts: tuple[float, ...]
    n_retained: int
    limit_mode: LimitMode


def precision_report(
    records: Sequence[BufferRecord],
    prob: float = 0.95,
    n_compare: int = 2,
    mode: LimitMode = LimitMode.RULE_OF_THUMB,
) -> list[PrecisionSummary]:
    """One PrecisionSummary per image from outlier-filtered buffer records.

    Bias is the plain mean of retained buffers. The critical difference uses
    the retained operator count and each operator's average retained
    replicates per parcel (fractional on unbalanced data), ordered by
    operator id.
    """
    summaries = []
    for image_id, image_records in sorted(partition_by_image(list(records)).items()):
        kept = [r for r in image_records if not r.outlier]
        if not kept:
            raise InsufficientDataError(f"image {image_id!r}: no retained records")
        comps = variance_components(kept)
        per_op_cells: dict[str, list[int]] = {}
        counts: dict[tuple[str, str], int] = {}
        for rec in kept:
            counts[(rec.operator_id, rec.parcel_id)] = counts.get((rec.operator_id, rec.parcel_id), 0) + 1
        for (op, _), c in counts.items():
            per_op_cells.setdefault(op, []).append(c)
        replicate_counts = tuple(float(np.mean(per_op_cells[op])) for op in sorted(per_op_cells))
        summaries.append(
            PrecisionSummary(
                image_id=image_id,
                bias=float(np.mean([r.buffer_m for r in kept])),
                sd_repeatability=comps.sd_repeatability,
                repeatability_limit=repeatability_limit(comps.sd_repeatability, prob, n_compare, mode),
                sd_reproducibility=comps.sd_reproducibility,
                reproducibility_limit=reproducibility_limit(comps.sd_reproducibility, prob, n_compare, mode),
                critical_difference=critical_difference(
                    comps.sd_reproducibility,
                    comps.sd_repeatability,
                    len(replicate_counts),
                    replicate_counts,
                ),
                operator_count=len(replicate_counts),
                replicate_counts=replicate_counts,
                n_retained=len(kept),
                limit_mode=mode,
            )
        )
    return summaries
