"""Shared builders for tests: random polygons and hand-rolled campaigns."""

import numpy as np

from parceltol import (
    Campaign,
    FactorLabels,
    ImageSource,
    LandCover,
    Observation,
    Operator,
    Polygon,
    ReferenceParcel,
    ShapeClass,
    Skill,
    SizeClass,
    Visibility,
)

DEFAULT_LABELS = FactorLabels(
    shape=ShapeClass.SIMPLE,
    land_cover=LandCover.BARE_SOIL,
    visibility=Visibility.GOOD_ALL,
)


def star_polygon(rng, n_min=6, n_max=20, r_min=0.5, r_max=1.0, center=(0.0, 0.0), radius=1.0):
    """Random star-shaped polygon on a jittered angle grid: always a simple ring."""
    m = int(rng.integers(n_min, n_max + 1))
    angles = (np.arange(m) + 0.95 * rng.uniform(size=m)) * (2.0 * np.pi / m)
    radii = rng.uniform(r_min, r_max, size=m) * radius
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)]) + np.asarray(center)
    return Polygon(pts)


def square_parcel(pid="P1", side=128.0, labels=DEFAULT_LABELS):
    """Square parcel; side 128 gives a power-of-two perimeter (exact float ops)."""
    poly = Polygon([(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)])
    return ReferenceParcel.from_polygon(id=pid, polygon=poly, labels=labels)


def manual_campaign(parcels, operator_ids, image_ids, buffers_by_key=None, replicates=1):
    """Campaign whose observation areas encode chosen buffer values.

    ``buffers_by_key`` maps (parcel_id, operator_id, image_id, replicate)
    to a buffer in meters; missing keys get buffer 0.
    """
    buffers_by_key = buffers_by_key or {}
    parcel_map = {p.id: p for p in parcels}
    observations = []
    for pid in parcel_map:
        for oid in operator_ids:
            for iid in image_ids:
                for rep in range(1, replicates + 1):
                    b = buffers_by_key.get((pid, oid, iid, rep), 0.0)
                    parcel = parcel_map[pid]
                    observations.append(
                        Observation(
                            parcel_id=pid,
                            operator_id=oid,
                            image_id=iid,
                            replicate=rep,
                            measured_area_m2=parcel.area_m2 + b * parcel.perimeter_m,
                        )
                    )
    return Campaign.build(
        parcels=parcels,
        operators=[Operator(id=o, skill=Skill.SKILLED) for o in operator_ids],
        images=[ImageSource(id=i, kind="test", gsd_m=1.0) for i in image_ids],
        observations=observations,
    )


def labels_cycle(i):
    """Deterministic varied factor labels for synthetic parcels."""
    shapes = list(ShapeClass)
    covers = list(LandCover)
    vis = list(Visibility)
    return FactorLabels(
        shape=shapes[i % len(shapes)],
        land_cover=covers[i % len(covers)],
        visibility=vis[i % len(vis)],
    )


__all__ = [
    "DEFAULT_LABELS",
    "star_polygon",
    "square_parcel",
    "manual_campaign",
    "labels_cycle",
    "SizeClass",
]
