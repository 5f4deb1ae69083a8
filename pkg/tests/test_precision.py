"""Variance components, repeatability/reproducibility limits, critical difference."""

import numpy as np
import pytest

from parceltol import (
    BufferRecord,
    InsufficientDataError,
    LimitMode,
    PrecisionDomainError,
    critical_difference,
    precision_report,
    repeatability_limit,
    reproducibility_limit,
    variance_components,
)


def _records(cells, parcel="P1", image="img1"):
    """cells: {operator_id: [buffer values]} for one parcel and image."""
    out = []
    for op, values in cells.items():
        for i, v in enumerate(values, start=1):
            out.append(BufferRecord(parcel_id=parcel, operator_id=op, image_id=image,
                                    replicate=i, buffer_m=v))
    return out


# ---------------------------------------------------------------------------
# variance components
# ---------------------------------------------------------------------------


def test_variance_components_hand_example():
    """A:{0,2}, B:{4,6}: within var 2, MS between 16, between component 7."""
    comps = variance_components(_records({"A": [0.0, 2.0], "B": [4.0, 6.0]}))
    assert np.isclose(comps.sd_repeatability**2, 2.0, rtol=1e-12)
    assert np.isclose(comps.sd_between_operators**2, 7.0, rtol=1e-12)
    assert np.isclose(comps.sd_reproducibility, 3.0, rtol=1e-12)
    assert comps.operator_count == 2
    assert np.isclose(comps.mean_replicates, 2.0)


def test_variance_components_identical_values():
    comps = variance_components(_records({"A": [1.0, 1.0, 1.0], "B": [1.0, 1.0, 1.0]}))
    assert comps.sd_repeatability == 0.0
    assert comps.sd_between_operators == 0.0
    assert comps.sd_reproducibility == 0.0


def test_variance_components_excludes_outliers():
    records = _records({"A": [0.0, 2.0], "B": [4.0, 6.0]})
    spiked = records + [BufferRecord("P1", "A", "img1", 99, 1e6, outlier=True)]
    a = variance_components(records)
    b = variance_components(spiked)
    assert a == b


def test_variance_components_needs_two_operators():
    with pytest.raises(InsufficientDataError, match="2 operators"):
        variance_components(_records({"A": [0.0, 1.0, 2.0]}))


def test_variance_components_rejects_all_singleton_cells():
    with pytest.raises(InsufficientDataError, match="singleton"):
        variance_components(_records({"A": [0.0], "B": [1.0]}))


def test_variance_components_clamps_negative_between():
    # operator means closer than replicate noise predicts -> clamped at 0
    comps = variance_components(_records({"A": [-3.0, 3.0], "B": [-3.0, 3.0]}))
    assert comps.sd_between_operators == 0.0
    assert comps.sd_reproducibility == comps.sd_repeatability


def test_variance_components_match_two_level_anova_oracle():
    """Balanced data: pooled estimates equal the classic one-way ANOVA
    moment estimators computed independently."""
    rng = np.random.default_rng(14)
    operators = [f"op{i}" for i in range(5)]
    op_means = {op: 0.4 * i for i, op in enumerate(operators)}
    records = []
    values_by_cell = {}
    for parcel in [f"P{i}" for i in range(12)]:
        for op in operators:
            vals = rng.normal(op_means[op], 1.0, size=3)
            values_by_cell[(parcel, op)] = vals
            records.extend(
                BufferRecord(parcel, op, "img1", r + 1, float(v)) for r, v in enumerate(vals)
            )
    comps = variance_components(records)

    ssw = dfw = ssb = dfb = 0.0
    nbar_sum = 0.0
    by_parcel = {}
    for (parcel, op), vals in values_by_cell.items():
        by_parcel.setdefault(parcel, []).append(vals)
        ssw += (len(vals) - 1) * np.var(vals, ddof=1)
        dfw += len(vals) - 1
    for groups in by_parcel.values():
        sizes = np.array([len(g) for g in groups], float)
        means = np.array([np.mean(g) for g in groups])
        grand = np.dot(sizes, means) / sizes.sum()
        ssb += float(np.dot(sizes, (means - grand) ** 2))
        dfb += len(groups) - 1
        nbar_sum += sizes.sum() - (sizes**2).sum() / sizes.sum()
    var_r = ssw / dfw
    var_l = max(0.0, (ssb / dfb - var_r) / (nbar_sum / dfb))
    assert np.isclose(comps.sd_repeatability, np.sqrt(var_r), rtol=1e-9)
    assert np.isclose(comps.sd_reproducibility, np.sqrt(var_r + var_l), rtol=1e-9)


# ---------------------------------------------------------------------------
# limits
# ---------------------------------------------------------------------------


def test_limits_reproduce_published_values():
    """Feeding the published SDs through the rule-of-thumb limit reproduces
    the published limits within ±0.01 m."""
    assert abs(repeatability_limit(0.92) - 2.58) <= 0.01
    assert abs(reproducibility_limit(1.02) - 2.86) <= 0.01
    assert abs(repeatability_limit(1.85) - 5.18) <= 0.01
    assert abs(reproducibility_limit(1.85) - 5.18) <= 0.01  # published rounds to 5.17
    assert abs(repeatability_limit(2.22) - 6.22) <= 0.01
    assert abs(reproducibility_limit(3.13) - 8.76) <= 0.01


def test_exact_limit_at_95_for_pairs():
    assert np.isclose(
        reproducibility_limit(1.0, prob=0.95, n=2, mode=LimitMode.EXACT), 2.772, atol=5e-4
    )


def test_rule_of_thumb_not_below_exact():
    for sd in (0.1, 1.0, 7.3):
        exact = reproducibility_limit(sd, prob=0.95, n=2, mode=LimitMode.EXACT)
        assert reproducibility_limit(sd, mode=LimitMode.RULE_OF_THUMB) >= exact


def test_zero_sd_zero_limit():
    assert repeatability_limit(0.0) == 0.0


def test_limit_rejects_bad_probability():
    with pytest.raises(PrecisionDomainError):
        reproducibility_limit(1.0, prob=1.5, n=2, mode=LimitMode.EXACT)
    with pytest.raises(PrecisionDomainError):
        reproducibility_limit(1.0, prob=0.0, n=2, mode=LimitMode.EXACT)


# ---------------------------------------------------------------------------
# critical difference
# ---------------------------------------------------------------------------


def test_critical_difference_five_operators_three_replicates():
    """Direct evaluation: (1.02, 0.92, p=5, n_i=3×5) gives 0.611."""
    cd = critical_difference(1.02, 0.92, 5, [3, 3, 3, 3, 3])
    assert abs(cd - 0.611) < 1e-3


def test_critical_difference_reduces_for_single_operator():
    # with sd_r = 0 and one operator with one replicate: CD = 2.8·sd_R/√2
    cd = critical_difference(1.5, 0.0, 1, [1])
    assert np.isclose(cd, 2.8 * 1.5 / np.sqrt(2.0), rtol=1e-12)


def test_critical_difference_large_replicate_limit():
    """With sd_R = sd_r and huge n_i the radicand collapses to
    (2.8·sd)²·(1/p)·Σ1/nᵢ."""
    sd, p, n = 1.3, 4, 10**6
    cd = critical_difference(sd, sd, p, [n] * p)
    expected = np.sqrt((2.8 * sd) ** 2 / n) / np.sqrt(2.0 * p)
    assert np.isclose(cd, expected, rtol=1e-9)
    assert cd < 1e-2


def test_critical_difference_negative_radicand_carries_terms():
    with pytest.raises(PrecisionDomainError) as err:
        critical_difference(0.5, 2.0, 3, [1000, 1000, 1000])
    assert err.value.term_reproducibility is not None
    assert err.value.term_repeatability is not None
    assert err.value.term_reproducibility < err.value.term_repeatability


def test_critical_difference_input_checks():
    with pytest.raises(PrecisionDomainError):
        critical_difference(1.0, 0.5, 0, [])
    with pytest.raises(PrecisionDomainError):
        critical_difference(1.0, 0.5, 2, [3])
    with pytest.raises(PrecisionDomainError):
        critical_difference(1.0, 0.5, 2, [3, 0])


# ---------------------------------------------------------------------------
# precision report
# ---------------------------------------------------------------------------


def _campaign_records(rng, bias=0.0, n_parcels=20, image="img1"):
    records = []
    for parcel in [f"P{i:02d}" for i in range(n_parcels)]:
        for op in ("op1", "op2", "op3"):
            for rep in (1, 2, 3):
                records.append(
                    BufferRecord(parcel, op, image, rep, float(rng.normal(bias, 1.0)))
                )
    return records


def test_report_single_image_single_row():
    rng = np.random.default_rng(20)
    summaries = precision_report(_campaign_records(rng))
    assert len(summaries) == 1
    assert summaries[0].image_id == "img1"
    assert summaries[0].operator_count == 3
    assert summaries[0].replicate_counts == (3.0, 3.0, 3.0)


def test_report_constant_shift_moves_bias_only():
    base = _campaign_records(np.random.default_rng(21))
    shifted = [BufferRecord(r.parcel_id, r.operator_id, r.image_id, r.replicate, r.buffer_m + 1.0)
               for r in base]
    s0 = precision_report(base)[0]
    s1 = precision_report(shifted)[0]
    assert np.isclose(s1.bias - s0.bias, 1.0, rtol=1e-9)
    assert np.isclose(s1.sd_repeatability, s0.sd_repeatability, rtol=1e-9)
    assert np.isclose(s1.sd_reproducibility, s0.sd_reproducibility, rtol=1e-9)


def test_report_scales_linearly():
    base = _campaign_records(np.random.default_rng(22))
    k = 3.7
    scaled = [BufferRecord(r.parcel_id, r.operator_id, r.image_id, r.replicate, k * r.buffer_m)
              for r in base]
    s0 = precision_report(base)[0]
    s1 = precision_report(scaled)[0]
    for attr in ("bias", "sd_repeatability", "repeatability_limit", "sd_reproducibility",
                 "reproducibility_limit", "critical_difference"):
        assert np.isclose(getattr(s1, attr), k * getattr(s0, attr), rtol=1e-9)


def test_report_internal_limit_identity():
    """limits must equal 2.8 × the reported SDs exactly (rule-of-thumb mode)."""
    s = precision_report(_campaign_records(np.random.default_rng(23)))[0]
    assert s.repeatability_limit == 2.8 * s.sd_repeatability
    assert s.reproducibility_limit == 2.8 * s.sd_reproducibility
    assert s.sd_reproducibility >= s.sd_repeatability


def test_report_excludes_flagged_records():
    records = _campaign_records(np.random.default_rng(24))
    clean = precision_report(records)[0]
    spiked = records + [
        BufferRecord("P00", "op1", "img1", 9, 500.0, outlier=True),
        BufferRecord("P00", "op2", "img1", 9, -500.0, outlier=True),
    ]
    assert precision_report(spiked)[0] == clean


def test_report_unbiased_campaign_small_bias():
    rng = np.random.default_rng(25)
    records = _campaign_records(rng, bias=0.0, n_parcels=60)
    s = precision_report(records)[0]
    sem = 1.0 / np.sqrt(len(records))
    assert abs(s.bias) < 3 * sem
