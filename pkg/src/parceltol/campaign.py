"""Measurement-campaign data model and the buffer-width transform.

A campaign is a set of reference parcels measured repeatedly by several
operators on several images. The buffer width of one measurement is its
signed area error spread uniformly along the reference boundary:

    buffer = (measured_area - reference_area) / reference_perimeter

so a buffer of +1 m means the measured polygon encloses one extra meter-wide
strip around the whole parcel. Negative buffers are underestimations.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .errors import ValidationError
from .geometry import Polygon, SizeClass, classify_size, polygon_area, polygon_perimeter

# Measured polygons whose area disagrees with a supplied measured_area_m2 by
# more than this many m² produce a validation warning (the polygon wins).
AREA_MISMATCH_WARN_M2 = 0.01

# Relative tolerance between supplied a_ref/p_ref and the reference geometry.
REFERENCE_CONSISTENCY_RTOL = 1e-6


class ShapeClass(enum.Enum):
    SIMPLE = "Simple"
    MEDIUM = "Medium"
    COMPLEX = "Complex"

    def __str__(self) -> str:
        return self.value


class LandCover(enum.Enum):
    BARE_SOIL = "BareSoil"
    GREEN_COVER = "GreenCover"
    MARSH = "Marsh"
    OLIVE_TREES = "OliveTrees"
    ORCHARD = "Orchard"
    PASTURE = "Pasture"
    VINEYARD = "Vineyard"

    def __str__(self) -> str:
        return self.value


class Visibility(enum.Enum):
    GOOD_ALL = "GoodAll"
    GOOD_ORTHO_POOR_CARTO = "GoodOrthoPoorCarto"
    POOR_ORTHO_GOOD_CARTO = "PoorOrthoGoodCarto"
    POOR_ALL = "PoorAll"

    def __str__(self) -> str:
        return self.value


class Skill(enum.Enum):
    SKILLED = "Skilled"
    UNSKILLED = "Unskilled"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FactorLabels:
    shape: ShapeClass
    land_cover: LandCover
    visibility: Visibility


@dataclass(frozen=True)
class ReferenceParcel:
    """Ground-truth parcel: geometry (optional) plus factor labels.

    ``area_m2``/``perimeter_m`` may be given directly when no geometry is
    available; when a polygon is present they must agree with it.
    """

    id: str
    labels: FactorLabels
    area_m2: float
    perimeter_m: float
    size_class: SizeClass
    polygon: Optional[Polygon] = None

    @classmethod
    def from_polygon(cls, id: str, polygon: Polygon, labels: FactorLabels) -> "ReferenceParcel":
        area = polygon_area(polygon)
        perimeter = polygon_perimeter(polygon)
        return cls(
            id=id,
            labels=labels,
            area_m2=area,
            perimeter_m=perimeter,
            size_class=classify_size(area),
            polygon=polygon,
        )

    def __post_init__(self):
        if self.area_m2 <= 0:
            raise ValidationError(f"parcel {self.id!r}: reference area must be positive")
        if self.perimeter_m <= 0:
            raise ValidationError(f"parcel {self.id!r}: reference perimeter must be positive")
        if self.polygon is not None:
            area = polygon_area(self.polygon)
            perim = polygon_perimeter(self.polygon)
            if abs(area - self.area_m2) > REFERENCE_CONSISTENCY_RTOL * area:
                raise ValidationError(
                    f"parcel {self.id!r}: stated area {self.area_m2} differs from geometry area {area}"
                )
            if abs(perim - self.perimeter_m) > REFERENCE_CONSISTENCY_RTOL * perim:
                raise ValidationError(
                    f"parcel {self.id!r}: stated perimeter {self.perimeter_m} differs from geometry perimeter {perim}"
                )
        expected = classify_size(self.area_m2)
        if self.size_class != expected:
            raise ValidationError(
                f"parcel {self.id!r}: size class {self.size_class} inconsistent with area "
                f"{self.area_m2} m² (expected {expected})"
            )


@dataclass(frozen=True)
class Operator:
    id: str
    skill: Skill


@dataclass(frozen=True)
class ImageSource:
    id: str
    kind: str
    gsd_m: float

    def __post_init__(self):
        if self.gsd_m <= 0:
            raise ValidationError(f"image {self.id!r}: ground sampling distance must be positive")


@dataclass(frozen=True)
class Observation:
    """One replicate measurement of one parcel on one image by one operator.

    Either ``measured_area_m2`` or ``measured_polygon`` must be present.
    When both are given the polygon-derived area wins; a disagreement above
    ``AREA_MISMATCH_WARN_M2`` is reported as a campaign validation warning.
    """

    parcel_id: str
    operator_id: str
    image_id: str
    replicate: int
    measured_area_m2: Optional[float] = None
    measured_polygon: Optional[Polygon] = None

    def __post_init__(self):
        if self.replicate < 1:
            raise ValidationError(f"observation {self.key()}: replicate index must be >= 1")
        if self.measured_area_m2 is None and self.measured_polygon is None:
            raise ValidationError(f"observation {self.key()}: needs a measured area or polygon")
        if self.area_m2() <= 0:
            raise ValidationError(f"observation {self.key()}: measured area must be positive")

    def key(self) -> tuple[str, str, str, int]:
        return (self.parcel_id, self.operator_id, self.image_id, self.replicate)

    def area_m2(self) -> float:
        if self.measured_polygon is not None:
            return polygon_area(self.measured_polygon)
        return float(self.measured_area_m2)


@dataclass(frozen=True)
class BufferRecord:
    """Buffer width of one observation, with its outlier status."""

    parcel_id: str
    operator_id: str
    image_id: str
    replicate: int
    buffer_m: float
    outlier: bool = False

    def key(self) -> tuple[str, str, str, int]:
        return (self.parcel_id, self.operator_id, self.image_id, self.replicate)

    def flagged(self, outlier: bool) -> "BufferRecord":
        return replace(self, outlier=outlier)


@dataclass(frozen=True)
class Campaign:
    """Immutable bundle of parcels, operators, images and observations."""

    parcels: tuple[ReferenceParcel, ...]
    operators: tuple[Operator, ...]
    images: tuple[ImageSource, ...]
    observations: tuple[Observation, ...]
    site: str = ""
    date: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def build(cls, parcels, operators, images, observations, site="", date="") -> "Campaign":
        """Construct and validate; raises ValidationError on broken invariants."""
        campaign = cls(
            parcels=tuple(parcels),
            operators=tuple(operators),
            images=tuple(images),
            observations=tuple(observations),
            site=site,
            date=date,
        )
        problems, warnings = campaign.check()
        if problems:
            raise ValidationError("invalid campaign: " + "; ".join(problems))
        return replace(campaign, warnings=tuple(warnings))

    def parcel_map(self) -> dict[str, ReferenceParcel]:
        return {p.id: p for p in self.parcels}

    def operator_map(self) -> dict[str, Operator]:
        return {o.id: o for o in self.operators}

    def image_map(self) -> dict[str, ImageSource]:
        return {i.id: i for i in self.images}

    def check(self) -> tuple[list[str], list[str]]:
        """Collect invariant violations and non-fatal warnings."""
        problems: list[str] = []
        warnings: list[str] = []
        for name, ids in (
            ("parcel", [p.id for p in self.parcels]),
            ("operator", [o.id for o in self.operators]),
            ("image", [i.id for i in self.images]),
        ):
            counts = Counter(ids)
            dupes = {x for x, c in counts.items() if c > 1}
            if dupes:
                problems.append(f"duplicate {name} ids: {sorted(dupes)}")

        parcel_ids = {p.id for p in self.parcels}
        operator_ids = {o.id for o in self.operators}
        image_ids = {i.id for i in self.images}
        seen_keys: dict[tuple, int] = {}
        covered: set[tuple[str, str]] = set()
        for idx, obs in enumerate(self.observations):
            if obs.parcel_id not in parcel_ids:
                problems.append(f"observation {obs.key()}: unknown parcel id {obs.parcel_id!r}")
            if obs.operator_id not in operator_ids:
                problems.append(f"observation {obs.key()}: unknown operator id {obs.operator_id!r}")
            if obs.image_id not in image_ids:
                problems.append(f"observation {obs.key()}: unknown image id {obs.image_id!r}")
            if obs.key() in seen_keys:
                problems.append(
                    f"duplicate observation key {obs.key()} (positions {seen_keys[obs.key()]} and {idx})"
                )
            seen_keys.setdefault(obs.key(), idx)
            covered.add((obs.parcel_id, obs.image_id))
            if obs.measured_polygon is not None and obs.measured_area_m2 is not None:
                mismatch = abs(polygon_area(obs.measured_polygon) - obs.measured_area_m2)
                if mismatch > AREA_MISMATCH_WARN_M2:
                    warnings.append(
                        f"observation {obs.key()}: stated area differs from polygon area by {mismatch:.3f} m²; "
                        "using the polygon"
                    )
        for parcel in self.parcels:
            for image in self.images:
                if (parcel.id, image.id) not in covered:
                    problems.append(f"parcel {parcel.id!r} has no observation on image {image.id!r}")
        return problems, warnings


def compute_buffer(obs: Observation, parcel: ReferenceParcel) -> float:
    """Buffer width in meters: (measured area − reference area) / reference perimeter.

    The sign is preserved: negative means the parcel area was underestimated.
    """
    if parcel.perimeter_m <= 0:
        raise ValidationError(f"parcel {parcel.id!r}: reference perimeter must be positive")
    return (obs.area_m2() - parcel.area_m2) / parcel.perimeter_m


def build_buffer_table(campaign: Campaign) -> list[BufferRecord]:
    """One BufferRecord per observation, ordered by (parcel, image, operator, replicate).

    Raises ValidationError listing every observation with a dangling foreign id.
    """
    parcels = campaign.parcel_map()
    dangling = [obs.key() for obs in campaign.observations if obs.parcel_id not in parcels]
    if dangling:
        raise ValidationError(f"observations reference unknown parcels: {dangling}")
    ordered = sorted(
        campaign.observations,
        key=lambda o: (o.parcel_id, o.image_id, o.operator_id, o.replicate),
    )
    return [
        BufferRecord(
            parcel_id=obs.parcel_id,
            operator_id=obs.operator_id,
            image_id=obs.image_id,
            replicate=obs.replicate,
            buffer_m=compute_buffer(obs, parcels[obs.parcel_id]),
        )
        for obs in ordered
    ]


def partition_by_image(records: Sequence[BufferRecord]) -> dict[str, list[BufferRecord]]:
    """Split records into per-image groups; the partition is total and disjoint."""
    groups: dict[str, list[BufferRecord]] = {}
    for rec in records:
        groups.setdefault(rec.image_id, []).append(rec)
    return groups
