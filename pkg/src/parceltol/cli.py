"""Command-line interface: analyze, simulate, validate.

Exit codes: 0 success, 2 input/validation failure, 3 computation failure,
1 unexpected error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import (
    DegenerateFitError,
    DegenerateSampleError,
    GenerationError,
    InsufficientDataError,
    ModelSpecError,
    ParcelTolError,
    PrecisionDomainError,
    ValidationError,
)
from .fileio import Config, load_campaign, load_config, read_campaign_meta
from .geometry import validate_polygon
from .pipeline import run_analyze, run_simulate

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_COMPUTATION = 3

_COMPUTATION_ERRORS = (
    InsufficientDataError,
    DegenerateSampleError,
    DegenerateFitError,
    PrecisionDomainError,
    GenerationError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parceltol",
        description="Accuracy and tolerance analysis of replicated parcel-area measurement campaigns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("analyze", "run the full analysis pipeline on a measured campaign"),
        ("simulate", "generate a synthetic campaign from the configured plan"),
        ("validate", "check config, file schemas and geometry without analyzing"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--out", help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides config seed)")
        p.add_argument(
            "--format",
            choices=("json", "text", "both"),
            help="report format for analyze (overrides config)",
        )
    return parser


def _load_config(args) -> Config:
    config = load_config(args.config)
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format is not None:
        overrides["format"] = args.format
    return dataclasses.replace(config, **overrides) if overrides else config


def _cmd_analyze(config: Config) -> int:
    report = run_analyze(config)
    ob = report.data["outliers"]
    print(f"analyzed {ob['total_records']} observations over {len(report.data['images'])} image(s)")
    print(f"outliers flagged: {ob['flagged_total']}")
    for path in report.paths:
        print(f"wrote {path}")
    for warning in report.data["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _cmd_simulate(config: Config) -> int:
    out = run_simulate(config)
    print(f"simulated {out.n_observations} observations over {out.n_parcels} parcels")
    if out.contaminated:
        print(f"contaminated observations: {len(out.contaminated)}")
    for path in (out.observations_csv, out.parcels_geojson, out.campaign_meta):
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(config: Config) -> int:
    if not config.observations_csv or not config.parcels_geojson:
        raise ValidationError("config must set observations_csv and parcels_geojson")
    meta = read_campaign_meta(config.campaign_meta) if config.campaign_meta else None
    campaign = load_campaign(config.observations_csv, config.parcels_geojson, meta)
    geometry_problems = []
    for parcel in campaign.parcels:
        if parcel.polygon is not None:
            for violation in validate_polygon(parcel.polygon):
                geometry_problems.append(f"parcel {parcel.id}: {violation}")
    print(
        f"campaign ok: {len(campaign.parcels)} parcels, {len(campaign.operators)} operators, "
        f"{len(campaign.images)} images, {len(campaign.observations)} observations"
    )
    for warning in campaign.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if geometry_problems:
        for problem in geometry_problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "analyze":
            return _cmd_analyze(config)
        if args.command == "simulate":
            return _cmd_simulate(config)
        return _cmd_validate(config)
    except _COMPUTATION_ERRORS as exc:
        print(f"computation error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except (ValidationError, ModelSpecError, ParcelTolError) as exc:
        print(f"validation error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - safety net
        print(f"unexpected error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
