"""Descriptive summaries, leave-one-out outlier screening, and normality testing.

The outlier screen studentizes each value against the mean and standard
deviation of the *other* values in its group (its jackknife distance) and
flags values whose distance exceeds a Monte Carlo estimate of the null
(1 - alpha) quantile for the group size. The normality check is a
Kolmogorov-Smirnov statistic against a normal law with estimated mean and
variance, with its p-value calibrated by Monte Carlo simulation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .campaign import BufferRecord
from .errors import DegenerateSampleError, InsufficientDataError
from .rngutil import derive_rng

Z_95 = float(stats.norm.ppf(0.975))

#: Block size (in random numbers) for chunked Monte Carlo table generation.
_MC_BLOCK = 4_000_000


@dataclass(frozen=True)
class DistributionSummary:
    """Sample moments of a buffer population (one image's worth, typically)."""

    mean: float
    std_dev: float
    std_err_mean: float
    ci95_lower: float
    ci95_upper: float
    n: int


def describe(values: Sequence[float]) -> DistributionSummary:
    """Sample mean, SD (n−1 denominator), SEM and normal-quantile 95% CI.

    The CI uses the two-sided normal quantile (1.96), not Student-t.
    Raises InsufficientDataError for fewer than two values.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InsufficientDataError(f"describe needs at least 2 values, got {x.size}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    sem = sd / np.sqrt(x.size)
    return DistributionSummary(
        mean=mean,
        std_dev=sd,
        std_err_mean=sem,
        ci95_lower=mean - Z_95 * sem,
        ci95_upper=mean + Z_95 * sem,
        n=int(x.size),
    )


def jackknife_distances(values: Sequence[float]) -> np.ndarray:
    """Leave-one-out studentized distance of each value.

    d_i = |x_i − mean_{−i}| / sd_{−i}, where the mean and SD exclude x_i.
    When sd_{−i} is zero the distance is +inf if x_i deviates from the
    remaining values and 0.0 otherwise. Needs at least 3 values.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"jackknife distances need at least 3 values, got {n}")
    out = np.empty(n)
    for i in range(n):
        rest = np.delete(x, i)
        dev = x[i] - rest.mean()
        sd = rest.std(ddof=1)
        if sd == 0.0:
            out[i] = 0.0 if dev == 0.0 else np.inf
        else:
            out[i] = abs(dev) / sd
    return out


def _loo_distance_matrix(samples: np.ndarray) -> np.ndarray:
    """Vectorized jackknife distances along the last axis (well-scaled input)."""
    n = samples.shape[-1]
    s = samples.sum(axis=-1, keepdims=True)
    q = (samples**2).sum(axis=-1, keepdims=True)
    mean_out = (s - samples) / (n - 1)
    ss_out = q - samples**2 - (n - 1) * mean_out**2
    var_out = np.maximum(ss_out, 0.0) / (n - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.abs(samples - mean_out) / np.sqrt(var_out)
    return np.where(var_out > 0, d, np.where(samples == mean_out, 0.0, np.inf))


@lru_cache(maxsize=64)
def _null_distance_pool(n: int, mc_samples: int, seed: int) -> np.ndarray:
    """Sorted pool of jackknife distances from standard-normal groups of size n."""
    rng = derive_rng(seed, "jackknife-null", n, mc_samples)
    pools = []
    rows_per_block = max(1, _MC_BLOCK // n)
    remaining = mc_samples
    while remaining > 0:
        rows = min(rows_per_block, remaining)
        draws = rng.standard_normal((rows, n))
        pools.append(_loo_distance_matrix(draws).ravel())
        remaining -= rows
    pool = np.concatenate(pools)
    pool.sort()
    return pool


def jackknife_threshold(n: int, alpha: float = 0.05, mc_samples: int = 10_000, seed: int = 0) -> float:
    """Monte Carlo (1 − alpha) quantile of the null jackknife distance for group size n.

    Estimated from ``mc_samples`` standard-normal groups of size ``n`` (all
    n distances of each group are pooled); deterministic for a fixed seed.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n < 3:
        raise InsufficientDataError(f"threshold needs group size >= 3, got {n}")
    pool = _null_distance_pool(n, mc_samples, seed)
    return float(np.quantile(pool, 1.0 - alpha))


class OutlierGrouping(enum.Enum):
    """How records are grouped before screening.

    PARCEL_IMAGE pools all operators and replicates of a parcel on one
    image; PARCEL_IMAGE_OPERATOR screens each operator's replicates alone.
    """

    PARCEL_IMAGE = "parcel_image"
    PARCEL_IMAGE_OPERATOR = "parcel_image_operator"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class OutlierReport:
    """Outcome of the jackknife screen over a set of buffer records."""

    flagged: tuple[tuple, ...]
    distances: Mapping[tuple, float]
    thresholds: Mapping[tuple[int, float], float]  # (group size, level) -> cutoff
    alpha: float
    grouping: OutlierGrouping
    bonferroni: bool
    max_rounds: int = 1
    skipped_groups: tuple[str, ...] = field(default=())

    def is_flagged(self, record: BufferRecord) -> bool:
        return record.key() in set(self.flagged)


def detect_outliers(
    records: Sequence[BufferRecord],
    alpha: float = 0.05,
    grouping: OutlierGrouping = OutlierGrouping.PARCEL_IMAGE,
    mc_samples: int = 10_000,
    seed: int = 0,
    bonferroni: bool = False,
    max_rounds: int = 1,
) -> OutlierReport:
    """Flag anomalous buffer values group by group.

    A record is flagged iff its jackknife distance within its group exceeds
    the Monte Carlo null quantile for that group's size (at ``alpha``, or
    ``alpha / group size`` when ``bonferroni`` is set). Groups with fewer
    than 3 records are skipped and reported in ``skipped_groups``.

    With ``max_rounds`` > 1 each group is re-screened after removing the
    records already flagged (sequential deletion). One gross error can
    inflate the leave-one-out SD of another and hide it ("masking"); a
    second round catches such pairs. Re-screening rounds test at the
    per-group familywise level (``alpha`` split over the group) so they
    only peel gross leftovers; re-testing everything at the nominal level
    would snowball on clean groups, whose spread shrinks after deletion.
    The default is a single pass, whose per-record false-flag rate is
    calibrated to ``alpha``.

    Reported distances are from the round a record was last evaluated in;
    thresholds are recorded per evaluated group size and level.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    groups: dict[tuple, list[BufferRecord]] = {}
    for rec in records:
        if grouping is OutlierGrouping.PARCEL_IMAGE:
            gkey = (rec.parcel_id, rec.image_id)
        else:
            gkey = (rec.parcel_id, rec.image_id, rec.operator_id)
        groups.setdefault(gkey, []).append(rec)

    flagged: list[tuple] = []
    distances: dict[tuple, float] = {}
    thresholds: dict[tuple, float] = {}
    skipped: list[str] = []
    for gkey in sorted(groups):
        members = groups[gkey]
        if len(members) < 3:
            skipped.append(f"group {gkey} skipped: only {len(members)} record(s)")
            continue
        group_flagged: set[tuple] = set()
        for round_idx in range(max_rounds):
            active = [m for m in members if m.key() not in group_flagged]
            if len(active) < 3:
                break
            n = len(active)
            level = alpha / n if (bonferroni or round_idx > 0) else alpha
            if (n, level) not in thresholds:
                thresholds[(n, level)] = jackknife_threshold(n, level, mc_samples, seed)
            threshold = thresholds[(n, level)]
            dist = jackknife_distances([m.buffer_m for m in active])
            new_flags = []
            for rec, d in zip(active, dist):
                distances[rec.key()] = float(d)
                if d > threshold:
                    new_flags.append(rec.key())
            if not new_flags:
                break
            group_flagged.update(new_flags)
        flagged.extend(k for m in members if (k := m.key()) in group_flagged)
    return OutlierReport(
        flagged=tuple(flagged),
        distances=distances,
        thresholds=thresholds,
        alpha=alpha,
        grouping=grouping,
        bonferroni=bonferroni,
        max_rounds=max_rounds,
        skipped_groups=tuple(skipped),
    )


def apply_outlier_flags(records: Sequence[BufferRecord], report: OutlierReport) -> list[BufferRecord]:
    """New record list with ``outlier=True`` on every flagged record."""
    flagged = set(report.flagged)
    return [rec.flagged(rec.key() in flagged) for rec in records]


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    p_value: float
    n: int
    method: str


def lilliefors_statistic(values: Sequence[float]) -> float:
    """Sup-distance between the empirical CDF and a normal CDF with fitted moments.

    D = sup_x |F̂(x) − Φ((x − x̄)/s)| with x̄, s estimated from the sample.
    Raises DegenerateSampleError if the sample has zero variance.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"statistic needs at least 2 values, got {n}")
    sd = x.std(ddof=1)
    if sd == 0.0:
        raise DegenerateSampleError("sample variance is zero; normality statistic undefined")
    z = np.sort((x - x.mean()) / sd)
    cdf = stats.norm.cdf(z)
    steps = np.arange(1, n + 1) / n
    d_plus = float((steps - cdf).max())
    d_minus = float((cdf - (steps - 1.0 / n)).max())
    return max(d_plus, d_minus)


@lru_cache(maxsize=32)
def lilliefors_null_table(n: int, mc_samples: int, seed: int) -> np.ndarray:
    """Sorted Monte Carlo null distribution of the statistic for sample size n.

    Simulates ``mc_samples`` standard-normal samples of size ``n`` and
    computes the statistic of each (in blocks, to bound memory).
    """
    rng = derive_rng(seed, "lilliefors-null", n, mc_samples)
    steps = np.arange(1, n + 1) / n
    stats_out = np.empty(mc_samples)
    rows_per_block = max(1, _MC_BLOCK // n)
    done = 0
    while done < mc_samples:
        rows = min(rows_per_block, mc_samples - done)
        draws = rng.standard_normal((rows, n))
        z = (draws - draws.mean(axis=1, keepdims=True)) / draws.std(axis=1, ddof=1, keepdims=True)
        z.sort(axis=1)
        cdf = stats.norm.cdf(z)
        d_plus = (steps - cdf).max(axis=1)
        d_minus = (cdf - (steps - 1.0 / n)).max(axis=1)
        stats_out[done : done + rows] = np.maximum(d_plus, d_minus)
        done += rows
    stats_out.sort()
    return stats_out


def lilliefors_test(values: Sequence[float], mc_samples: int = 10_000, seed: int = 0) -> NormalityResult:
    """Normality test with Monte Carlo p-value, deterministic for a fixed seed.

    p = (1 + #{null statistics ≥ D}) / (mc_samples + 1), which is monotone
    in D for fixed n and never exactly zero. Needs at least 4 values.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 4:
        raise InsufficientDataError(f"normality test needs at least 4 values, got {x.size}")
    d = lilliefors_statistic(x)
    null = lilliefors_null_table(int(x.size), mc_samples, seed)
    exceed = int(null.size - np.searchsorted(null, d, side="left"))
    p = (1 + exceed) / (mc_samples + 1)
    return NormalityResult(statistic=d, p_value=p, n=int(x.size), method=f"ks-mc-{mc_samples}")
