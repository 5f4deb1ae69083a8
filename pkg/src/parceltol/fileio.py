"""File formats and configuration.

Ingestion formats are deliberately plain text: a CSV of observations and a
GeoJSON FeatureCollection of reference parcels. Writers emit floats with
``repr`` so a parse → emit → parse round trip reproduces values exactly.
All writes go through a temp file plus rename, so readers never see a
partial file.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .campaign import (
    Campaign,
    FactorLabels,
    ImageSource,
    LandCover,
    Observation,
    Operator,
    ReferenceParcel,
    ShapeClass,
    Skill,
    Visibility,
)
from .errors import ValidationError
from .geometry import Polygon, SizeClass, validate_polygon
from .linear_model import ModelSpec, Term
from .precision import LimitMode
from .robust_stats import OutlierGrouping
from .simulator import OperatorErrorModel, PlanImage, SimulationPlan

OBSERVATION_COLUMNS = ("parcel_id", "operator_id", "image_id", "replicate", "measured_area_m2")

REQUIRED_PARCEL_PROPERTIES = ("id", "shape_class", "land_cover", "visibility")

CAMPAIGN_META_FILENAME = "campaign_meta.json"


def _enum_from_value(enum_cls, value, context: str):
    for member in enum_cls:
        if member.value == value:
            return member
    allowed = [m.value for m in enum_cls]
    raise ValidationError(f"{context}: unknown value {value!r}; allowed: {allowed}")


def atomic_write_text(path: Union[str, Path], text: str) -> None:
    """Write via temp-file-then-rename in the target directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Observations CSV
# ---------------------------------------------------------------------------


def _parse_area(raw: str, row_no: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValidationError(
            f"row {row_no}: invalid number {raw!r} in column measured_area_m2 "
            "(use '.' as the decimal separator)"
        ) from None
    if not math.isfinite(value):
        raise ValidationError(f"row {row_no}: measured_area_m2 must be finite, got {raw!r}")
    return value


def parse_observations_csv(path: Union[str, Path]) -> list[Observation]:
    """Read observations from CSV (UTF-8, mandatory header, '.' decimals).

    Errors carry 1-based row numbers (the header is row 1); duplicate
    observation keys name both offending rows.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        missing = [c for c in OBSERVATION_COLUMNS if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing required column(s) {missing}; found {header}")
        idx = {c: header.index(c) for c in OBSERVATION_COLUMNS}

        observations: list[Observation] = []
        seen: dict[tuple, int] = {}
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ValidationError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            try:
                replicate = int(row[idx["replicate"]])
            except ValueError:
                raise ValidationError(
                    f"row {row_no}: invalid replicate {row[idx['replicate']]!r} (integer required)"
                ) from None
            area = _parse_area(row[idx["measured_area_m2"]], row_no)
            try:
                obs = Observation(
                    parcel_id=row[idx["parcel_id"]],
                    operator_id=row[idx["operator_id"]],
                    image_id=row[idx["image_id"]],
                    replicate=replicate,
                    measured_area_m2=area,
                )
            except ValidationError as exc:
                raise ValidationError(f"row {row_no}: {exc}") from None
            if obs.key() in seen:
                raise ValidationError(
                    f"duplicate observation key {obs.key()} in rows {seen[obs.key()]} and {row_no}"
                )
            seen[obs.key()] = row_no
            observations.append(obs)
    return observations


def write_observations_csv(path: Union[str, Path], observations: Sequence[Observation]) -> None:
    lines = [",".join(OBSERVATION_COLUMNS)]
    for obs in observations:
        lines.append(
            f"{obs.parcel_id},{obs.operator_id},{obs.image_id},{obs.replicate},{obs.area_m2()!r}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Parcels GeoJSON
# ---------------------------------------------------------------------------


def parse_parcels_geojson(path: Union[str, Path]) -> list[ReferenceParcel]:
    """Read reference parcels from a GeoJSON FeatureCollection of Polygons.

    Each feature needs properties id, shape_class, land_cover, visibility.
    Multipolygons and polygons with interior rings (holes) are rejected;
    geometry errors name the offending feature.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ValidationError(f"{path}: expected a GeoJSON FeatureCollection")
    parcels: list[ReferenceParcel] = []
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        fid = str(props.get("id", f"<feature {i}>"))
        missing = [k for k in REQUIRED_PARCEL_PROPERTIES if k not in props]
        if missing:
            raise ValidationError(f"feature {fid}: missing required properties {missing}")
        geom = feature.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "MultiPolygon":
            raise ValidationError(f"feature {fid}: MultiPolygon parcels are not supported")
        if gtype != "Polygon":
            raise ValidationError(f"feature {fid}: geometry must be a Polygon, got {gtype!r}")
        rings = geom.get("coordinates") or []
        if len(rings) == 0:
            raise ValidationError(f"feature {fid}: polygon has no rings")
        if len(rings) > 1:
            raise ValidationError(f"feature {fid}: polygons with holes are not supported")
        ring = [(float(x), float(y)) for x, y in rings[0]]
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        poly = Polygon(ring)
        violations = validate_polygon(poly)
        if violations:
            raise ValidationError(f"feature {fid}: invalid geometry: {'; '.join(violations)}")
        labels = FactorLabels(
            shape=_enum_from_value(ShapeClass, props["shape_class"], f"feature {fid}, shape_class"),
            land_cover=_enum_from_value(LandCover, props["land_cover"], f"feature {fid}, land_cover"),
            visibility=_enum_from_value(Visibility, props["visibility"], f"feature {fid}, visibility"),
        )
        parcels.append(ReferenceParcel.from_polygon(id=str(props["id"]), polygon=poly, labels=labels))
    return parcels


def write_parcels_geojson(path: Union[str, Path], parcels: Sequence[ReferenceParcel]) -> None:
    features = []
    for parcel in parcels:
        if parcel.polygon is None:
            raise ValidationError(f"parcel {parcel.id!r} has no geometry to write")
        ring = [[float(x), float(y)] for x, y in parcel.polygon.vertices]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "id": parcel.id,
                    "shape_class": parcel.labels.shape.value,
                    "land_cover": parcel.labels.land_cover.value,
                    "visibility": parcel.labels.visibility.value,
                },
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Campaign metadata sidecar (operator skills, image properties)
# ---------------------------------------------------------------------------


def write_campaign_meta(path: Union[str, Path], campaign: Campaign) -> None:
    doc = {
        "site": campaign.site,
        "date": campaign.date,
        "operator_skills": {o.id: o.skill.value for o in campaign.operators},
        "images": {i.id: {"kind": i.kind, "gsd_m": i.gsd_m} for i in campaign.images},
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_campaign_meta(path: Union[str, Path]) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: campaign metadata must be a JSON object")
    return doc


def load_campaign(
    observations_csv: Union[str, Path],
    parcels_geojson: Union[str, Path],
    meta: Optional[dict] = None,
) -> Campaign:
    """Assemble a validated Campaign from the two input files.

    Operators and images are inferred from the observations; a metadata
    dict (see ``write_campaign_meta``) supplies operator skills and image
    properties, with neutral defaults otherwise. If no metadata is given
    and a ``campaign_meta.json`` sits next to the CSV it is used.
    """
    observations = parse_observations_csv(observations_csv)
    parcels = parse_parcels_geojson(parcels_geojson)
    if meta is None:
        sidecar = Path(observations_csv).parent / CAMPAIGN_META_FILENAME
        meta = read_campaign_meta(sidecar) if sidecar.exists() else {}
    skills = meta.get("operator_skills", {})
    image_meta = meta.get("images", {})
    operator_ids = sorted({obs.operator_id for obs in observations})
    image_ids = sorted({obs.image_id for obs in observations})
    operators = [
        Operator(id=oid, skill=_enum_from_value(Skill, skills.get(oid, "Skilled"), f"operator {oid}, skill"))
        for oid in operator_ids
    ]
    images = [
        ImageSource(
            id=iid,
            kind=str(image_meta.get(iid, {}).get("kind", "unknown")),
            gsd_m=float(image_meta.get(iid, {}).get("gsd_m", 1.0)),
        )
        for iid in image_ids
    ]
    return Campaign.build(
        parcels=parcels,
        operators=operators,
        images=images,
        observations=observations,
        site=str(meta.get("site", "")),
        date=str(meta.get("date", "")),
    )


# ---------------------------------------------------------------------------
# Simulation plan (de)serialization
# ---------------------------------------------------------------------------


def _mix_from_dict(enum_cls, raw: Optional[Mapping], context: str):
    if raw is None:
        return None
    return {_enum_from_value(enum_cls, k, context): float(v) for k, v in raw.items()}


def plan_from_dict(raw: Mapping) -> SimulationPlan:
    """Build a SimulationPlan from parsed JSON."""
    try:
        operators = tuple(
            OperatorErrorModel(
                id=str(o["id"]),
                bias_m=float(o.get("bias_m", 0.0)),
                sd_m=float(o.get("sd_m", 1.0)),
                skill=_enum_from_value(Skill, o.get("skill", "Skilled"), f"operator {o.get('id')}, skill"),
            )
            for o in raw["operators"]
        )
        images = tuple(
            PlanImage(
                id=str(im["id"]),
                kind=str(im.get("kind", "synthetic")),
                gsd_m=float(im.get("gsd_m", 1.0)),
                noise_multiplier=float(im.get("noise_multiplier", 1.0)),
            )
            for im in raw["images"]
        )
        kwargs = dict(
            n_parcels=int(raw["n_parcels"]),
            operators=operators,
            images=images,
            replicates=int(raw.get("replicates", 3)),
            master_seed=int(raw.get("master_seed", 0)),
            dropout_rate=float(raw.get("dropout_rate", 0.0)),
            contamination_rate=float(raw.get("contamination_rate", 0.0)),
            site=str(raw.get("site", "synthetic")),
        )
    except KeyError as exc:
        raise ValidationError(f"simulation plan: missing required field {exc}") from None
    if "contamination_magnitude_m" in raw:
        lo, hi = raw["contamination_magnitude_m"]
        kwargs["contamination_magnitude_m"] = (float(lo), float(hi))
    for key, enum_cls in (
        ("size_mix", SizeClass),
        ("shape_mix", ShapeClass),
        ("land_cover_mix", LandCover),
        ("visibility_mix", Visibility),
    ):
        mix = _mix_from_dict(enum_cls, raw.get(key), f"simulation plan, {key}")
        if mix is not None:
            kwargs[key] = mix
    if "area_ranges_m2" in raw:
        kwargs["area_ranges_m2"] = {
            _enum_from_value(SizeClass, k, "simulation plan, area_ranges_m2"): (float(v[0]), float(v[1]))
            for k, v in raw["area_ranges_m2"].items()
        }
    return SimulationPlan(**kwargs)


def plan_to_dict(plan: SimulationPlan) -> dict:
    return {
        "n_parcels": plan.n_parcels,
        "replicates": plan.replicates,
        "master_seed": plan.master_seed,
        "operators": [
            {"id": o.id, "bias_m": o.bias_m, "sd_m": o.sd_m, "skill": o.skill.value} for o in plan.operators
        ],
        "images": [
            {"id": i.id, "kind": i.kind, "gsd_m": i.gsd_m, "noise_multiplier": i.noise_multiplier}
            for i in plan.images
        ],
        "size_mix": {k.value: v for k, v in plan.size_mix.items()},
        "shape_mix": {k.value: v for k, v in plan.shape_mix.items()},
        "land_cover_mix": {k.value: v for k, v in plan.land_cover_mix.items()},
        "visibility_mix": {k.value: v for k, v in plan.visibility_mix.items()},
        "dropout_rate": plan.dropout_rate,
        "contamination_rate": plan.contamination_rate,
        "contamination_magnitude_m": list(plan.contamination_magnitude_m),
        "area_ranges_m2": {k.value: list(v) for k, v in plan.area_ranges_m2.items()},
        "site": plan.site,
    }


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Config:
    """Pipeline configuration; see README for the JSON schema."""

    observations_csv: Optional[str] = None
    parcels_geojson: Optional[str] = None
    campaign_meta: Optional[str] = None
    output_dir: str = "out"
    format: str = "both"
    seed: Optional[int] = None
    outlier_alpha: float = 0.05
    outlier_grouping: OutlierGrouping = OutlierGrouping.PARCEL_IMAGE
    outlier_bonferroni: bool = False
    outlier_max_rounds: int = 1
    outlier_mc_samples: int = 10_000
    normality_mc_samples: int = 10_000
    model_terms: tuple[Term, ...] = ("operator", "image", "size", "shape", "visibility", "land_cover")
    anova_method: str = "marginal"
    tolerance_mode: LimitMode = LimitMode.RULE_OF_THUMB
    tolerance_probability: float = 0.95
    tolerance_n: int = 2
    simulation: Optional[SimulationPlan] = None

    def __post_init__(self):
        if self.format not in ("json", "text", "both"):
            raise ValidationError(f"format must be json, text or both, got {self.format!r}")
        if not 0 < self.outlier_alpha < 1:
            raise ValidationError(f"outlier_alpha must be in (0, 1), got {self.outlier_alpha}")
        if self.outlier_max_rounds < 1:
            raise ValidationError(f"outlier_max_rounds must be >= 1, got {self.outlier_max_rounds}")
        if self.anova_method not in ("marginal", "sequential"):
            raise ValidationError(f"anova_method must be marginal or sequential, got {self.anova_method!r}")
        ModelSpec(terms=self.model_terms)  # validates term structure

    def require_seed(self) -> int:
        if self.seed is None:
            raise ValidationError(
                "a seed is required (Monte Carlo steps must be reproducible); "
                "set 'seed' in the config or pass --seed"
            )
        return int(self.seed)

    #: fields that do not influence computed results (excluded from the hash)
    _IO_FIELDS = ("observations_csv", "parcels_geojson", "campaign_meta", "output_dir", "format")

    def canonical_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["outlier_grouping"] = self.outlier_grouping.value
        out["tolerance_mode"] = self.tolerance_mode.value
        out["model_terms"] = [list(t) if isinstance(t, tuple) else t for t in self.model_terms]
        out["simulation"] = plan_to_dict(self.simulation) if self.simulation else None
        return out

    def sha256(self) -> str:
        """Hash of the analysis-relevant configuration.

        Input/output paths and the report format are excluded, so the same
        data analyzed the same way gets the same provenance hash wherever
        the files live.
        """
        payload = {k: v for k, v in self.canonical_dict().items() if k not in self._IO_FIELDS}
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _terms_from_json(raw) -> tuple[Term, ...]:
    terms: list[Term] = []
    for t in raw:
        if isinstance(t, str):
            terms.append(t)
        elif isinstance(t, list):
            terms.append(tuple(str(x) for x in t))
        else:
            raise ValidationError(f"model term must be a string or list of strings, got {t!r}")
    return tuple(terms)


def config_from_dict(raw: Mapping, base_dir: Optional[Path] = None) -> Config:
    """Config from parsed JSON; relative paths resolve against ``base_dir``."""
    if not isinstance(raw, Mapping):
        raise ValidationError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(Config)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(f"unknown config field(s): {unknown}")

    def _path(key):
        value = raw.get(key)
        if value is None:
            return None
        p = Path(value)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return str(p)

    kwargs: dict = {}
    for key in ("observations_csv", "parcels_geojson", "campaign_meta"):
        if raw.get(key) is not None:
            kwargs[key] = _path(key)
    if raw.get("output_dir") is not None:
        kwargs["output_dir"] = _path("output_dir")
    for key in ("format", "anova_method"):
        if key in raw:
            kwargs[key] = str(raw[key])
    if "seed" in raw and raw["seed"] is not None:
        kwargs["seed"] = int(raw["seed"])
    for key in ("outlier_alpha", "tolerance_probability"):
        if key in raw:
            kwargs[key] = float(raw[key])
    for key in ("outlier_mc_samples", "normality_mc_samples", "tolerance_n", "outlier_max_rounds"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if "outlier_bonferroni" in raw:
        kwargs["outlier_bonferroni"] = bool(raw["outlier_bonferroni"])
    if "outlier_grouping" in raw:
        kwargs["outlier_grouping"] = _enum_from_value(
            OutlierGrouping, str(raw["outlier_grouping"]), "config outlier_grouping"
        )
    if "tolerance_mode" in raw:
        kwargs["tolerance_mode"] = _enum_from_value(LimitMode, str(raw["tolerance_mode"]), "config tolerance_mode")
    if "model_terms" in raw:
        kwargs["model_terms"] = _terms_from_json(raw["model_terms"])
    if raw.get("simulation") is not None:
        kwargs["simulation"] = plan_from_dict(raw["simulation"])
    return Config(**kwargs)


def load_config(path: Union[str, Path]) -> Config:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)
