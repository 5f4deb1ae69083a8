"""Synthetic campaigns with known error structure.

Measurement error is injected on the buffer scale (meters of boundary
offset): each observation draws B ~ Normal(operator bias, (operator SD ×
image multiplier)²) and the measured area is reference area + B × reference
perimeter, so analysis results can be checked against the injected
parameters. An optional contamination mode adds gross errors at a
configurable rate to exercise the outlier screen.

Everything is reproducible: parcels and observations draw from generators
derived from the master seed plus their indices, so identical plans give
byte-identical campaigns regardless of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

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
from .errors import GenerationError, ValidationError
from .geometry import Polygon, SizeClass, classify_size, polygon_area, polygon_perimeter, validate_polygon
from .rngutil import derive_rng

MAX_ATTEMPTS = 1000

#: Target-area ranges per size class in m² (upper end of Small is exclusive).
DEFAULT_AREA_RANGES: dict[SizeClass, tuple[float, float]] = {
    SizeClass.SMALL: (5_000.0, 20_000.0),
    SizeClass.MEDIUM: (20_000.0, 80_000.0),
    SizeClass.LARGE: (80_000.0, 300_000.0),
}


def _uniform_mix(members) -> dict:
    return {m: 1.0 / len(members) for m in members}


@dataclass(frozen=True)
class OperatorErrorModel:
    """Systematic buffer offset and replicate noise for one operator."""

    id: str
    bias_m: float
    sd_m: float
    skill: Skill = Skill.SKILLED

    def __post_init__(self):
        if self.sd_m < 0:
            raise ValidationError(f"operator {self.id!r}: noise SD must be non-negative")


@dataclass(frozen=True)
class PlanImage:
    """Image source plus its multiplier on every operator's noise SD."""

    id: str
    kind: str = "synthetic"
    gsd_m: float = 1.0
    noise_multiplier: float = 1.0

    def __post_init__(self):
        if self.noise_multiplier < 0:
            raise ValidationError(f"image {self.id!r}: noise multiplier must be non-negative")


@dataclass(frozen=True)
class SimulationPlan:
    """Everything needed to generate a campaign deterministically."""

    n_parcels: int
    operators: tuple[OperatorErrorModel, ...]
    images: tuple[PlanImage, ...]
    replicates: int = 3
    master_seed: int = 0
    size_mix: Mapping[SizeClass, float] = field(default_factory=lambda: _uniform_mix(list(SizeClass)))
    shape_mix: Mapping[ShapeClass, float] = field(default_factory=lambda: _uniform_mix(list(ShapeClass)))
    land_cover_mix: Mapping[LandCover, float] = field(default_factory=lambda: _uniform_mix(list(LandCover)))
    visibility_mix: Mapping[Visibility, float] = field(default_factory=lambda: _uniform_mix(list(Visibility)))
    dropout_rate: float = 0.0
    contamination_rate: float = 0.0
    contamination_magnitude_m: tuple[float, float] = (10.0, 30.0)
    area_ranges_m2: Mapping[SizeClass, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_AREA_RANGES)
    )
    site: str = "synthetic"

    def __post_init__(self):
        if self.n_parcels < 1:
            raise ValidationError("plan needs at least one parcel")
        if self.replicates < 1:
            raise ValidationError("plan needs at least one replicate per cell")
        if not self.operators:
            raise ValidationError("plan needs at least one operator")
        if not self.images:
            raise ValidationError("plan needs at least one image")
        for name, ids in (("operator", [o.id for o in self.operators]), ("image", [i.id for i in self.images])):
            if len(set(ids)) != len(ids):
                raise ValidationError(f"duplicate {name} ids in plan: {ids}")
        for label, mix in (
            ("size_mix", self.size_mix),
            ("shape_mix", self.shape_mix),
            ("land_cover_mix", self.land_cover_mix),
            ("visibility_mix", self.visibility_mix),
        ):
            total = sum(mix.values())
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(f"{label} weights sum to {total}, expected 1")
            if any(w < 0 for w in mix.values()):
                raise ValidationError(f"{label} has negative weights")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout rate must be in [0, 1)")
        if not 0.0 <= self.contamination_rate < 1.0:
            raise ValidationError("contamination rate must be in [0, 1)")
        lo, hi = self.contamination_magnitude_m
        if not 0 < lo <= hi:
            raise ValidationError("contamination magnitudes must satisfy 0 < lo <= hi")

    def injected_sd_repeatability(self, image_id: str) -> float:
        """Pooled replicate SD this plan injects on one image (equal weights)."""
        mult = {i.id: i.noise_multiplier for i in self.images}[image_id]
        return float(np.sqrt(np.mean([(o.sd_m * mult) ** 2 for o in self.operators])))

    def injected_sd_reproducibility(self, image_id: str) -> float:
        """√(replicate variance + sample variance of the operator biases)."""
        var_r = self.injected_sd_repeatability(image_id) ** 2
        biases = [o.bias_m for o in self.operators]
        var_l = float(np.var(biases, ddof=1)) if len(biases) > 1 else 0.0
        return float(np.sqrt(var_r + var_l))


def _draw_from_mix(rng: np.random.Generator, mix: Mapping) -> object:
    members = sorted(mix, key=str)
    weights = np.array([mix[m] for m in members], dtype=float)
    return members[rng.choice(len(members), p=weights / weights.sum())]


def _base_rectangle(rng: np.random.Generator) -> np.ndarray:
    aspect = rng.uniform(1.0, 4.0)
    return np.array([(0.0, 0.0), (aspect, 0.0), (aspect, 1.0), (0.0, 1.0)])


def _perturbed_rectangle(rng: np.random.Generator) -> np.ndarray:
    """Rectangle with up to 3 edges broken by a displaced midpoint vertex."""
    verts = _base_rectangle(rng)
    short = min(verts[1][0], 1.0)
    n_bumps = int(rng.integers(1, 4))
    edges = sorted(rng.choice(4, size=n_bumps, replace=False).tolist())
    out = []
    for i in range(4):
        out.append(verts[i])
        if i in edges:
            a, b = verts[i], verts[(i + 1) % 4]
            mid = (a + b) / 2.0
            edge = b - a
            normal = np.array([-edge[1], edge[0]]) / np.hypot(*edge)
            # bump bounded by the short side so opposite bumps cannot meet
            offset = rng.uniform(0.05, 0.2) * short * rng.choice([-1.0, 1.0])
            out.append(mid + offset * normal)
    return np.array(out)


def _star_polygon(rng: np.random.Generator) -> np.ndarray:
    """Random star-shaped (hence simple) polygon of 8 to 20 vertices.

    Angles sit on a jittered regular grid so no angular gap reaches π;
    chords then stay inside disjoint wedges and cannot cross.
    """
    m = int(rng.integers(8, 21))
    angles = (np.arange(m) + 0.95 * rng.uniform(size=m)) * (2.0 * np.pi / m)
    radii = rng.uniform(0.5, 1.0, size=m)
    return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


_SHAPE_BUILDERS = {
    ShapeClass.SIMPLE: _base_rectangle,
    ShapeClass.MEDIUM: _perturbed_rectangle,
    ShapeClass.COMPLEX: _star_polygon,
}


def generate_parcel(plan: SimulationPlan, index: int) -> ReferenceParcel:
    """Parcel number ``index`` of the plan, deterministic in (seed, index).

    Shape class decides the outline family, the drawn size class decides the
    target area the outline is scaled to. Invalid outlines are resampled, up
    to MAX_ATTEMPTS.
    """
    rng = derive_rng(plan.master_seed, "parcel", index)
    size_class = _draw_from_mix(rng, plan.size_mix)
    shape_class = _draw_from_mix(rng, plan.shape_mix)
    labels = FactorLabels(
        shape=shape_class,
        land_cover=_draw_from_mix(rng, plan.land_cover_mix),
        visibility=_draw_from_mix(rng, plan.visibility_mix),
    )
    lo, hi = plan.area_ranges_m2[size_class]
    target_area = rng.uniform(lo, hi)
    for _ in range(MAX_ATTEMPTS):
        raw = _SHAPE_BUILDERS[shape_class](rng)
        poly = Polygon(raw)
        if validate_polygon(poly):
            continue
        k = float(np.sqrt(target_area / polygon_area(poly)))
        scaled = Polygon(raw * k)
        if validate_polygon(scaled):
            continue
        area = polygon_area(scaled)
        return ReferenceParcel(
            id=f"P{index:04d}",
            labels=labels,
            area_m2=area,
            perimeter_m=polygon_perimeter(scaled),
            size_class=classify_size(area),
            polygon=scaled,
        )
    raise GenerationError(f"parcel {index}: no valid outline after {MAX_ATTEMPTS} attempts")


def simulate_observation(
    parcel: ReferenceParcel,
    operator: OperatorErrorModel,
    image: PlanImage,
    replicate: int,
    rng: np.random.Generator,
    gross_error_m: float = 0.0,
) -> Observation:
    """One measurement: buffer noise drawn, then mapped back to an area.

    B ~ Normal(bias, (SD × image multiplier)²) (+ an optional gross error),
    and the measured area is a_ref + B · p_ref. Non-positive areas are
    redrawn, up to MAX_ATTEMPTS.
    """
    scale = operator.sd_m * image.noise_multiplier
    for _ in range(MAX_ATTEMPTS):
        buffer_m = rng.normal(operator.bias_m, scale) + gross_error_m
        area = parcel.area_m2 + buffer_m * parcel.perimeter_m
        if area > 0:
            return Observation(
                parcel_id=parcel.id,
                operator_id=operator.id,
                image_id=image.id,
                replicate=replicate,
                measured_area_m2=area,
            )
    raise GenerationError(
        f"observation ({parcel.id}, {operator.id}, {image.id}, {replicate}): "
        f"no positive measured area after {MAX_ATTEMPTS} draws"
    )


def _contaminated_observation(parcel, operator, image, replicate, rng, plan) -> Observation:
    """Observation with a gross buffer error added.

    A large negative error can push a small parcel's area below zero for
    every noise draw; the gross error is then redrawn (sign and magnitude),
    which truncates impossible underestimations the same way reality does.
    """
    lo, hi = plan.contamination_magnitude_m
    for _ in range(MAX_ATTEMPTS):
        gross = rng.uniform(lo, hi) * rng.choice([-1.0, 1.0])
        try:
            return simulate_observation(parcel, operator, image, replicate, rng, gross)
        except GenerationError:
            continue
    raise GenerationError(
        f"observation ({parcel.id}, {operator.id}, {image.id}, {replicate}): "
        f"no feasible gross error after {MAX_ATTEMPTS} attempts"
    )


@dataclass(frozen=True)
class SimulationTruth:
    """Ground truth of a generated campaign (for calibration studies)."""

    plan: SimulationPlan
    contaminated: tuple[tuple[str, str, str, int], ...]


def generate_campaign_with_truth(plan: SimulationPlan) -> tuple[Campaign, SimulationTruth]:
    """Full factorial campaign plus the set of contaminated observation keys.

    With a dropout rate, each observation is independently dropped, except
    that the first replicate of each (parcel, image) pair is always kept so
    every pair stays covered.
    """
    parcels = [generate_parcel(plan, i) for i in range(plan.n_parcels)]
    operators = [Operator(id=o.id, skill=o.skill) for o in plan.operators]
    images = [ImageSource(id=im.id, kind=im.kind, gsd_m=im.gsd_m) for im in plan.images]

    observations = []
    contaminated = []
    for pi, parcel in enumerate(parcels):
        for oi, op_model in enumerate(plan.operators):
            for ii, image in enumerate(plan.images):
                for replicate in range(1, plan.replicates + 1):
                    rng = derive_rng(plan.master_seed, "observation", pi, oi, ii, replicate)
                    first_of_pair = oi == 0 and replicate == 1
                    dropped = rng.random() < plan.dropout_rate
                    if dropped and not first_of_pair:
                        continue
                    if rng.random() < plan.contamination_rate:
                        obs = _contaminated_observation(parcel, op_model, image, replicate, rng, plan)
                        contaminated.append(obs.key())
                    else:
                        obs = simulate_observation(parcel, op_model, image, replicate, rng)
                    observations.append(obs)
    campaign = Campaign.build(
        parcels=parcels,
        operators=operators,
        images=images,
        observations=observations,
        site=plan.site,
        date="",
    )
    return campaign, SimulationTruth(plan=plan, contaminated=tuple(contaminated))


def generate_campaign(plan: SimulationPlan) -> Campaign:
    """Deterministic synthetic campaign for the plan (see the *_with_truth variant)."""
    return generate_campaign_with_truth(plan)[0]
