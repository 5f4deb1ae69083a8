"""
From area errors to buffer widths
=================================

Comparing raw area errors across parcels is misleading: a 400 m² error is
huge on a garden and noise on a ranch. Dividing the signed area error by
the reference perimeter turns it into a *buffer width*: the uniform strip,
in meters, that would have to be added to (or shaved off) the parcel
boundary to explain the discrepancy. Buffers are comparable across parcel
sizes and are the quantity all the statistics in this package consume.
"""

from parceltol import (
    FactorLabels,
    LandCover,
    Observation,
    Polygon,
    ReferenceParcel,
    ShapeClass,
    Visibility,
    build_buffer_table,
    compute_buffer,
    partition_by_image,
)
from helpers_demo import toy_campaign

labels = FactorLabels(
    shape=ShapeClass.SIMPLE, land_cover=LandCover.PASTURE, visibility=Visibility.GOOD_ALL
)
parcel = ReferenceParcel.from_polygon(
    id="P1",
    polygon=Polygon([(0, 0), (100, 0), (100, 100), (0, 100)]),
    labels=labels,
)

# One measured area 400 m² above truth on a 400 m perimeter = a 1 m buffer.
obs = Observation(parcel_id="P1", operator_id="op1", image_id="ortho", replicate=1,
                  measured_area_m2=10_400.0)
print("buffer width:", compute_buffer(obs, parcel), "m")

# Underestimations come out negative.
under = Observation(parcel_id="P1", operator_id="op1", image_id="ortho", replicate=2,
                    measured_area_m2=9_800.0)
print("underestimation:", compute_buffer(under, parcel), "m")

# A campaign bundles parcels, operators, images and replicated observations.
# build_buffer_table computes every buffer in a deterministic order.
campaign = toy_campaign()
table = build_buffer_table(campaign)
print("\ncampaign:", len(campaign.parcels), "parcels,", len(campaign.observations), "observations")
print("first records:")
for rec in table[:5]:
    print("  ", rec.key(), f"buffer = {rec.buffer_m:+.3f} m")

# Downstream statistics run per image.
for image_id, records in partition_by_image(table).items():
    mean = sum(r.buffer_m for r in records) / len(records)
    print(f"image {image_id}: {len(records)} records, mean buffer {mean:+.3f} m")
