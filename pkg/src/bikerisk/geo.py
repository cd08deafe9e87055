"""Geodesic helpers shared by the graph, scenario, and service layers.

All coordinates are WGS84 degrees. Points are (lon, lat) tuples, matching
GeoJSON ordering. Distances are meters. At street scale (< a few km) a local
equirectangular projection around the point of interest is accurate to well
under a meter, which is what the snapping code relies on.
"""

from __future__ import annotations

import math

EARTH_RADIUS_M = 6_371_000.0

Point = tuple[float, float]  # (lon, lat)


def haversine_m(a: Point, b: Point) -> float:
    """Great-circle distance in meters between two (lon, lat) points."""
    lon1, lat1 = math.radians(a[0]), math.radians(a[1])
    lon2, lat2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def polyline_length_m(points: list[Point]) -> float:
    """Arc length of a (lon, lat) polyline in meters."""
    return sum(haversine_m(points[i], points[i + 1]) for i in range(len(points) - 1))


def _local_xy(p: Point, origin: Point) -> tuple[float, float]:
    """Equirectangular projection of p to meters relative to origin."""
    lat0 = math.radians(origin[1])
    x = math.radians(p[0] - origin[0]) * math.cos(lat0) * EARTH_RADIUS_M
    y = math.radians(p[1] - origin[1]) * EARTH_RADIUS_M
    return x, y


def project_onto_segment(p: Point, a: Point, b: Point) -> tuple[Point, float, float]:
    """Project p onto segment a-b.

    Returns (snapped point, distance from p in meters, fraction along a-b).
    The fraction is clamped to [0, 1].
    """
    px, py = _local_xy(p, p)  # (0, 0)
    ax, ay = _local_xy(a, p)
    bx, by = _local_xy(b, p)
    dx, dy = bx - ax, by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        t = 0.0
    else:
        t = ((px - ax) * dx + (py - ay) * dy) / seg_sq
        t = min(1.0, max(0.0, t))
    snapped = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
    return snapped, haversine_m(p, snapped), t


def point_in_polygon(p: Point, ring: list[Point]) -> bool:
    """Ray-casting point-in-polygon test on a (lon, lat) ring.

    The ring may be open or closed; points exactly on an edge count as inside
    on one side only (standard even-odd rule), which is fine for sampling.
    """
    x, y = p
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def bbox_of(points: list[Point]) -> tuple[float, float, float, float]:
    """(min_lon, min_lat, max_lon, max_lat) of a point list."""
    lons = [p[0] for p in points]
    lats = [p[1] for p in points]
    return min(lons), min(lats), max(lons), max(lats)


def bboxes_overlap(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def segment_intersects_bbox(a: Point, b: Point, bbox: tuple[float, float, float, float]) -> bool:
    """True if segment a-b touches the (min_lon, min_lat, max_lon, max_lat) box.

    Liang-Barsky clipping in coordinate space; exact enough for tile-style
    queries where the box is axis-aligned in lon/lat.
    """
    min_x, min_y, max_x, max_y = bbox
    x0, y0 = a
    x1, y1 = b
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, x0 - min_x),
        (dx, max_x - x0),
        (-dy, y0 - min_y),
        (dy, max_y - y0),
    ):
        if p == 0.0:
            if q < 0.0:
                return False
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return False
            t0 = max(t0, r)
        else:
            if r < t0:
                return False
            t1 = min(t1, r)
    return t0 <= t1


def polyline_intersects_bbox(points: list[Point], bbox: tuple[float, float, float, float]) -> bool:
    return any(
        segment_intersects_bbox(points[i], points[i + 1], bbox) for i in range(len(points) - 1)
    )


def point_along_polyline(points: list[Point], offset_m: float) -> Point:
    """Point at arc-length offset_m from the start of the polyline (clamped)."""
    if offset_m <= 0.0:
        return points[0]
    remaining = offset_m
    for i in range(len(points) - 1):
        seg = haversine_m(points[i], points[i + 1])
        if remaining <= seg and seg > 0.0:
            t = remaining / seg
            return (
                points[i][0] + t * (points[i + 1][0] - points[i][0]),
                points[i][1] + t * (points[i + 1][1] - points[i][1]),
            )
        remaining -= seg
    return points[-1]
