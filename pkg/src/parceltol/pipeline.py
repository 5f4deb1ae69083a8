"""End-to-end analysis and simulation runs, with machine- and human-readable reports.

The analysis order is fixed: buffer table → outlier screen → per-image
descriptive summary and normality test → per-image factor ANOVA → per-image
precision figures. Reports carry a provenance block (tool version, config
hash, seed) and are byte-identical for identical inputs and configuration.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .campaign import BufferRecord, Campaign, build_buffer_table, partition_by_image
from .errors import InsufficientDataError, ValidationError
from .fileio import (
    CAMPAIGN_META_FILENAME,
    Config,
    load_campaign,
    read_campaign_meta,
    write_campaign_meta,
    write_observations_csv,
    write_parcels_geojson,
    atomic_write_text,
)
from .linear_model import ModelSpec, Term, _term_factors, fit_model
from .precision import precision_report
from .robust_stats import (
    OutlierReport,
    apply_outlier_flags,
    describe,
    detect_outliers,
    lilliefors_test,
)
from .simulator import generate_campaign_with_truth

SCHEMA_VERSION = "1"

#: Factors the pipeline can derive for every record.
PIPELINE_FACTORS = ("operator", "image", "size", "shape", "visibility", "land_cover")


@dataclass(frozen=True)
class AnalysisReport:
    """Analysis outcome as a plain dict (see ``data``) plus file paths."""

    data: dict
    paths: tuple[str, ...]


def _factor_columns(records: list[BufferRecord], campaign: Campaign) -> dict[str, list[str]]:
    parcels = campaign.parcel_map()
    cols: dict[str, list[str]] = {f: [] for f in PIPELINE_FACTORS}
    for rec in records:
        parcel = parcels[rec.parcel_id]
        cols["operator"].append(rec.operator_id)
        cols["image"].append(rec.image_id)
        cols["size"].append(parcel.size_class.value)
        cols["shape"].append(parcel.labels.shape.value)
        cols["visibility"].append(parcel.labels.visibility.value)
        cols["land_cover"].append(parcel.labels.land_cover.value)
    return cols


def _usable_terms(terms: tuple[Term, ...], cols: dict[str, list[str]], context: str, warnings: list[str]):
    """Drop terms whose factors have fewer than two observed levels."""
    level_counts = {f: len(set(v)) for f, v in cols.items()}
    usable: list[Term] = []
    for term in terms:
        factors = _term_factors(term)
        unknown = [f for f in factors if f not in cols]
        if unknown:
            raise ValidationError(f"{context}: unknown model factor(s) {unknown}; available: {sorted(cols)}")
        degenerate = [f for f in factors if level_counts[f] < 2]
        if degenerate:
            label = term if isinstance(term, str) else "*".join(term)
            warnings.append(
                f"{context}: term {label!r} dropped, factor(s) {degenerate} have a single observed level"
            )
            continue
        usable.append(term)
    # an interaction must not outlive its main effects
    mains = {t for t in usable if isinstance(t, str)}
    kept: list[Term] = []
    for term in usable:
        if isinstance(term, str) or all(f in mains for f in term):
            kept.append(term)
        else:
            warnings.append(f"{context}: interaction {'*'.join(term)!r} dropped with its main effect")
    return tuple(kept)


def _json_value(x: float):
    # full precision so report identities (e.g. limit = 2.8 × SD) hold bit-exactly;
    # NaN (undefined SD of singleton groups) becomes null
    if x != x:
        return None
    return float(x)


def _anova_block(records: list[BufferRecord], campaign: Campaign, config: Config, context: str, warnings):
    cols = _factor_columns(records, campaign)
    terms = _usable_terms(config.model_terms, cols, context, warnings)
    if not terms:
        warnings.append(f"{context}: no usable model terms; ANOVA skipped")
        return None
    spec = ModelSpec(terms=terms)
    y = [rec.buffer_m for rec in records]
    result = fit_model(cols, y, spec, anova_method=config.anova_method)
    ls_means_block = {}
    for term in terms:
        if isinstance(term, str):
            ls_means_block[term] = [
                {
                    "level": m.level,
                    "ls_mean": _json_value(m.mean),
                    "observed_sd": _json_value(m.observed_sd),
                    "n": m.n,
                }
                for m in result.ls_means(term)
            ]
    return {
        "terms": [
            {
                "term": row.label,
                "df": row.df,
                "sum_sq": _json_value(row.sum_sq),
                "f": _json_value(row.f_stat),
                "p": _json_value(row.p_value),
                "testable": row.testable,
            }
            for row in result.anova.rows
        ],
        "residual": {"df": result.fit.df_residual, "sum_sq": _json_value(result.anova.rss)},
        "overall_f": _json_value(result.overall_f),
        "overall_p": _json_value(result.overall_p),
        "r_squared": _json_value(result.r_squared),
        "method": result.anova.method,
        "ls_means": ls_means_block,
    }


def _outlier_block(report: OutlierReport, records: list[BufferRecord]) -> dict:
    per_image: dict[str, int] = {}
    for key in report.flagged:
        per_image[key[2]] = per_image.get(key[2], 0) + 1
    return {
        "alpha": report.alpha,
        "grouping": report.grouping.value,
        "bonferroni": report.bonferroni,
        "max_rounds": report.max_rounds,
        "total_records": len(records),
        "flagged_total": len(report.flagged),
        "flagged_by_image": dict(sorted(per_image.items())),
        "flagged_keys": [list(k) for k in sorted(report.flagged)],
        "thresholds": {
            f"n={n},level={level:g}": _json_value(t)
            for (n, level), t in sorted(report.thresholds.items())
        },
        "skipped_groups": list(report.skipped_groups),
    }


def analyze_campaign(campaign: Campaign, config: Config) -> tuple[dict, list[BufferRecord]]:
    """Run the full analysis on an in-memory campaign.

    Returns the report dict plus the outlier-flagged buffer table it was
    derived from.
    """
    seed = config.require_seed()
    warnings: list[str] = list(campaign.warnings)

    records = build_buffer_table(campaign)
    outliers = detect_outliers(
        records,
        alpha=config.outlier_alpha,
        grouping=config.outlier_grouping,
        mc_samples=config.outlier_mc_samples,
        seed=seed,
        bonferroni=config.outlier_bonferroni,
        max_rounds=config.outlier_max_rounds,
    )
    flagged_records = apply_outlier_flags(records, outliers)

    images_block = {}
    for image_id, image_records in sorted(partition_by_image(flagged_records).items()):
        retained = [r for r in image_records if not r.outlier]
        context = f"image {image_id}"
        if len(retained) < 2:
            raise InsufficientDataError(f"{context}: fewer than 2 retained records")
        buffers = [r.buffer_m for r in retained]
        summary = describe(buffers)
        normality = lilliefors_test(buffers, mc_samples=config.normality_mc_samples, seed=seed)
        images_block[image_id] = {
            "distribution": {
                "mean": _json_value(summary.mean),
                "std_dev": _json_value(summary.std_dev),
                "std_err_mean": _json_value(summary.std_err_mean),
                "ci95_lower": _json_value(summary.ci95_lower),
                "ci95_upper": _json_value(summary.ci95_upper),
                "n": summary.n,
            },
            "normality": {
                "statistic": _json_value(normality.statistic),
                "p_value": _json_value(normality.p_value),
                "n": normality.n,
                "method": normality.method,
            },
            "anova": _anova_block(retained, campaign, config, context, warnings),
        }

    for summary in precision_report(
        flagged_records,
        prob=config.tolerance_probability,
        n_compare=config.tolerance_n,
        mode=config.tolerance_mode,
    ):
        images_block[summary.image_id]["precision"] = {
            "bias": _json_value(summary.bias),
            "sd_repeatability": _json_value(summary.sd_repeatability),
            "repeatability_limit": _json_value(summary.repeatability_limit),
            "sd_reproducibility": _json_value(summary.sd_reproducibility),
            "reproducibility_limit": _json_value(summary.reproducibility_limit),
            "critical_difference": _json_value(summary.critical_difference),
            "operator_count": summary.operator_count,
            "replicate_counts": [_json_value(c) for c in summary.replicate_counts],
            "n_retained": summary.n_retained,
            "limit_mode": summary.limit_mode.value,
        }

    data = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {
            "tool": "parceltol",
            "tool_version": __version__,
            "config_sha256": config.sha256(),
            "seed": seed,
        },
        "site": campaign.site,
        "date": campaign.date,
        "counts": {
            "parcels": len(campaign.parcels),
            "operators": len(campaign.operators),
            "images": len(campaign.images),
            "observations": len(campaign.observations),
        },
        "outliers": _outlier_block(outliers, records),
        "images": images_block,
        "warnings": sorted(warnings),
    }
    return data, flagged_records


def _buffer_table_csv(records: list[BufferRecord]) -> str:
    lines = ["parcel_id,operator_id,image_id,replicate,buffer_m,outlier"]
    for rec in records:
        lines.append(
            f"{rec.parcel_id},{rec.operator_id},{rec.image_id},{rec.replicate},"
            f"{rec.buffer_m!r},{str(rec.outlier).lower()}"
        )
    return "\n".join(lines) + "\n"


def _fmt(value, width=12) -> str:
    if isinstance(value, float):
        return f"{value:>{width}.4f}"
    return f"{str(value):>{width}}"


def _text_report(data: dict) -> str:
    images = sorted(data["images"])
    lines: list[str] = []
    lines.append(f"parceltol {data['provenance']['tool_version']} analysis report")
    lines.append(f"site: {data['site'] or '-'}   seed: {data['provenance']['seed']}")
    lines.append(f"config sha256: {data['provenance']['config_sha256']}")
    lines.append("")

    lines.append("BUFFER DISTRIBUTION BY IMAGE [m]")
    header = f"{'parameter':<24}" + "".join(f"{img:>14}" for img in images)
    lines.append(header)
    dist_rows = (
        ("mean", "mean"),
        ("std dev", "std_dev"),
        ("std err mean", "std_err_mean"),
        ("upper 95% mean", "ci95_upper"),
        ("lower 95% mean", "ci95_lower"),
        ("observations", "n"),
    )
    for label, key in dist_rows:
        row = f"{label:<24}"
        for img in images:
            row += _fmt(data["images"][img]["distribution"][key], 14)
        lines.append(row)
    lines.append("")

    lines.append("NORMALITY OF BUFFER VALUES (KS statistic, Monte Carlo p)")
    for img in images:
        block = data["images"][img]["normality"]
        lines.append(
            f"  {img:<16} D = {block['statistic']:.4f}   p = {block['p_value']:.4f}   "
            f"n = {block['n']}   ({block['method']})"
        )
    lines.append("")

    lines.append("OUTLIER SCREEN (leave-one-out studentized distances)")
    ob = data["outliers"]
    lines.append(
        f"  flagged {ob['flagged_total']} of {ob['total_records']} records "
        f"at alpha = {ob['alpha']} (grouping: {ob['grouping']})"
    )
    for img in images:
        lines.append(f"  {img:<16} flagged: {ob['flagged_by_image'].get(img, 0)}")
    if ob["skipped_groups"]:
        lines.append(f"  skipped groups: {len(ob['skipped_groups'])}")
    lines.append("")

    for img in images:
        block = data["images"][img].get("anova")
        lines.append(f"ANOVA — image {img}")
        if block is None:
            lines.append("  (skipped; see warnings)")
            lines.append("")
            continue
        lines.append(f"  {'term':<28}{'df':>4}{'sum sq':>14}{'F':>12}{'p':>12}")
        for row in block["terms"]:
            if row["testable"]:
                lines.append(
                    f"  {row['term']:<28}{row['df']:>4}{row['sum_sq']:>14.4f}"
                    f"{row['f']:>12.4f}{row['p']:>12.4g}"
                )
            else:
                lines.append(f"  {row['term']:<28}{'-':>4}{'aliased':>14}{'-':>12}{'-':>12}")
        lines.append(
            f"  {'residual':<28}{block['residual']['df']:>4}{block['residual']['sum_sq']:>14.4f}"
        )
        lines.append(
            f"  overall F = {block['overall_f']:.4f}  p = {block['overall_p']:.4g}  "
            f"r² = {block['r_squared']:.4f}  ({block['method']} tests)"
        )
        lines.append("")

    lines.append("PRECISION BY IMAGE [m]")
    header = f"{'parameter':<24}" + "".join(f"{img:>14}" for img in images)
    lines.append(header)
    prec_rows = (
        ("mean value = bias", "bias"),
        ("sd repeatability", "sd_repeatability"),
        ("repeatability limit", "repeatability_limit"),
        ("sd reproducibility", "sd_reproducibility"),
        ("reproducibility limit", "reproducibility_limit"),
        ("critical difference", "critical_difference"),
        ("operators", "operator_count"),
        ("records retained", "n_retained"),
    )
    for label, key in prec_rows:
        row = f"{label:<24}"
        for img in images:
            row += _fmt(data["images"][img]["precision"][key], 14)
        lines.append(row)
    mode = {data["images"][img]["precision"]["limit_mode"] for img in images}
    lines.append(f"limit mode: {', '.join(sorted(mode))}")
    lines.append("")

    if data["warnings"]:
        lines.append("WARNINGS")
        for w in data["warnings"]:
            lines.append(f"  - {w}")
        lines.append("")
    return "\n".join(lines)


def run_analyze(config: Config, campaign: Optional[Campaign] = None) -> AnalysisReport:
    """Analyze a campaign from the configured input files and write reports.

    Writes report.json and/or report.txt (per ``config.format``) and the
    intermediate buffer_table.csv into the output directory; every report
    value can be re-derived from that table.
    """
    if campaign is None:
        if not config.observations_csv or not config.parcels_geojson:
            raise ValidationError("config must set observations_csv and parcels_geojson")
        meta = read_campaign_meta(config.campaign_meta) if config.campaign_meta else None
        campaign = load_campaign(config.observations_csv, config.parcels_geojson, meta)
    data, records = analyze_campaign(campaign, config)

    out_dir = Path(config.output_dir)
    paths: list[str] = []
    table_path = out_dir / "buffer_table.csv"
    atomic_write_text(table_path, _buffer_table_csv(records))
    paths.append(str(table_path))
    if config.format in ("json", "both"):
        p = out_dir / "report.json"
        atomic_write_text(p, json.dumps(data, indent=2, sort_keys=True) + "\n")
        paths.append(str(p))
    if config.format in ("text", "both"):
        p = out_dir / "report.txt"
        atomic_write_text(p, _text_report(data))
        paths.append(str(p))
    return AnalysisReport(data=data, paths=tuple(paths))


@dataclass(frozen=True)
class SimulationOutput:
    observations_csv: str
    parcels_geojson: str
    campaign_meta: str
    n_observations: int
    n_parcels: int
    contaminated: tuple[tuple[str, str, str, int], ...]


def run_simulate(config: Config) -> SimulationOutput:
    """Generate a campaign from the configured plan and write its files.

    Emits observations.csv, parcels.geojson and campaign_meta.json into the
    output directory; the files are directly consumable by ``run_analyze``.
    A config seed overrides the plan's master seed.
    """
    if config.simulation is None:
        raise ValidationError("config has no 'simulation' plan")
    plan = config.simulation
    if config.seed is not None:
        plan = dataclasses.replace(plan, master_seed=int(config.seed))
    campaign, truth = generate_campaign_with_truth(plan)
    out_dir = Path(config.output_dir)
    obs_path = out_dir / "observations.csv"
    parcels_path = out_dir / "parcels.geojson"
    meta_path = out_dir / CAMPAIGN_META_FILENAME
    write_observations_csv(obs_path, list(campaign.observations))
    write_parcels_geojson(parcels_path, list(campaign.parcels))
    write_campaign_meta(meta_path, campaign)
    return SimulationOutput(
        observations_csv=str(obs_path),
        parcels_geojson=str(parcels_path),
        campaign_meta=str(meta_path),
        n_observations=len(campaign.observations),
        n_parcels=len(campaign.parcels),
        contaminated=truth.contaminated,
    )
