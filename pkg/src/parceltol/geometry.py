"""Planar polygon primitives: validity checks, area, perimeter, size classes.

Coordinates are projected Cartesian meters (e.g. UTM). Polygons are simple
rings without holes; the first vertex is not repeated at the end.
"""

from __future__ import annotations

import enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

# Consecutive vertices closer than this are considered duplicates.
DUPLICATE_TOLERANCE_M = 1e-9

# Size-class boundaries in m²; both boundary values belong to Medium.
SMALL_MAX_M2 = 20_000.0
LARGE_MIN_M2 = 80_000.0


class SizeClass(enum.Enum):
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"

    def __str__(self) -> str:
        return self.value


class Polygon:
    """An ordered ring of (x, y) vertices in meters.

    The constructor only checks array shape; semantic validity (vertex
    count, duplicate vertices, self-intersection, positive area) is
    reported by :func:`validate_polygon` and enforced by the measurement
    functions.
    """

    __slots__ = ("vertices", "_violations")

    def __init__(self, vertices: Iterable[Sequence[float]]):
        arr = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError("polygon vertices must be an (n, 2) array of coordinates")
        if not np.isfinite(arr).all():
            raise ValidationError("polygon vertices must be finite numbers")
        arr.setflags(write=False)
        self.vertices = arr
        self._violations: list[str] | None = None

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polygon) and np.array_equal(self.vertices, other.vertices)

    def __repr__(self) -> str:
        return f"Polygon({self.vertices.tolist()!r})"

    def violations(self) -> list[str]:
        """Cached invariant check; see :func:`validate_polygon`."""
        if self._violations is None:
            self._violations = _find_violations(self.vertices)
        return list(self._violations)


def _signed_area(verts: np.ndarray) -> float:
    # centering guards against cancellation at large coordinate offsets (UTM)
    centered = verts - verts.mean(axis=0)
    x, y = centered[:, 0], centered[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    # r collinear with pq assumed; checks r within the bounding box of pq
    return (
        min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
        and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])
    )


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(p3, p4, p1):
        return True
    if d2 == 0 and _on_segment(p3, p4, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, p3):
        return True
    if d4 == 0 and _on_segment(p1, p2, p4):
        return True
    return False


def _find_violations(verts: np.ndarray) -> list[str]:
    n = len(verts)
    violations = []
    if n < 3:
        violations.append(f"too few vertices: {n} < 3")
        return violations

    closing = np.roll(verts, -1, axis=0)
    edge_len = np.hypot(*(closing - verts).T)
    for i in np.flatnonzero(edge_len < DUPLICATE_TOLERANCE_M):
        violations.append(f"duplicate consecutive vertices at indices {i} and {(i + 1) % n}")
    if violations:
        return violations

    # O(n²) pairwise edge test; adjacent edges share an endpoint and are skipped.
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                violations.append(f"self-intersection between edges {i} and {j}")
    if violations:
        return violations

    if abs(_signed_area(verts)) <= 0.0:
        violations.append("zero enclosed area (degenerate ring)")
    return violations


def validate_polygon(poly: Polygon) -> list[str]:
    """Return the list of invariant violations (empty iff the polygon is valid).

    Reported violations name the vertex or edge indices involved. Never raises.
    """
    return poly.violations()


def _require_valid(poly: Polygon) -> None:
    violations = poly.violations()
    if violations:
        raise ValidationError("invalid polygon: " + "; ".join(violations))


def polygon_area(poly: Polygon) -> float:
    """Enclosed area in m² by the shoelace formula, independent of orientation.

    Raises ValidationError naming the violated invariant for invalid rings.
    """
    _require_valid(poly)
    return abs(_signed_area(poly.vertices))


def polygon_perimeter(poly: Polygon) -> float:
    """Ring length in meters, including the closing edge."""
    _require_valid(poly)
    diffs = np.roll(poly.vertices, -1, axis=0) - poly.vertices
    return float(np.hypot(diffs[:, 0], diffs[:, 1]).sum())


def classify_size(area_m2: float, small_max: float = SMALL_MAX_M2, large_min: float = LARGE_MIN_M2) -> SizeClass:
    """Map an area to its size class (Small < 2 ha, Large > 8 ha, Medium between).

    Boundary areas (exactly 2 ha or 8 ha) classify as Medium. The thresholds
    can be overridden for campaigns that use different class limits.
    """
    if not np.isfinite(area_m2) or area_m2 <= 0:
        raise ValidationError(f"area must be positive and finite, got {area_m2!r}")
    if not 0 < small_max < large_min:
        raise ValidationError("size thresholds must satisfy 0 < small_max < large_min")
    if area_m2 < small_max:
        return SizeClass.SMALL
    if area_m2 > large_min:
        return SizeClass.LARGE
    return SizeClass.MEDIUM


def translate(poly: Polygon, dx: float, dy: float) -> Polygon:
    """New polygon shifted by (dx, dy)."""
    return Polygon(poly.vertices + np.array([dx, dy]))


def scale(poly: Polygon, factor: float) -> Polygon:
    """New polygon scaled about the origin by a positive factor."""
    if factor <= 0:
        raise ValidationError("scale factor must be positive")
    return Polygon(poly.vertices * factor)


def reverse(poly: Polygon) -> Polygon:
    """New polygon with the vertex order reversed."""
    return Polygon(poly.vertices[::-1])
