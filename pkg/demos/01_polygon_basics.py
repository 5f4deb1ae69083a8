"""
Polygons, areas, perimeters and size classes
============================================

The geometry layer works on plain planar rings in meters (projected
coordinates). Everything else in the package is built on the two numbers a
ring gives us: its enclosed area and its boundary length.
"""

import numpy as np

from parceltol import Polygon, classify_size, polygon_area, polygon_perimeter, validate_polygon

# A reference parcel is just an ordered ring of vertices; the first vertex
# is not repeated at the end.
square = Polygon([(0, 0), (100, 0), (100, 100), (0, 100)])
print("square area     :", polygon_area(square), "m²")
print("square perimeter:", polygon_perimeter(square), "m")

# Orientation does not matter: the shoelace result is taken as an absolute value.
clockwise = Polygon([(0, 0), (0, 100), (100, 100), (100, 0)])
print("clockwise area  :", polygon_area(clockwise), "m²")

# validate_polygon reports problems instead of raising, naming the vertices
# involved. The measurement functions refuse invalid rings.
bow_tie = Polygon([(0, 0), (1, 1), (1, 0), (0, 1)])
print("\nbow-tie violations:", validate_polygon(bow_tie))

try:
    polygon_area(bow_tie)
except ValueError as exc:
    print("area on a bow-tie  ->", exc)

# Parcels are binned into three size classes; the thresholds are 2 ha and
# 8 ha, with both boundary values counting as Medium.
for area in (19_000.0, 20_000.0, 50_000.0, 80_000.0, 90_000.0):
    print(f"{area:>9.0f} m² -> {classify_size(area)}")

# Area scales with the square of lengths, perimeter linearly: handy as a
# self-check when re-projecting or changing units.
k = 3.0
scaled = Polygon(np.asarray(square.vertices) * k)
print("\nscale factor", k, "-> area ratio", polygon_area(scaled) / polygon_area(square))
