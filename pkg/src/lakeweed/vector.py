"""Polygon ingestion (GeoJSON subset), point-in-polygon tests, rasterization.

Containment uses the even-odd rule over all rings, so hole semantics do not
depend on ring orientation (OSM exports make no orientation promises).
Points exactly on an edge count as inside; that tie-break is part of the
contract and is shared by the scalar and vectorized paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, DataError
from .geo import CRS_WGS84, GeoRaster


@dataclass(frozen=True)
class LakeBoundary:
    """Polygon in lon/lat: first ring is the shell, the rest are holes."""

    rings: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.rings:
            raise BoundaryError("boundary needs at least one ring")
        rings = []
        for idx, ring in enumerate(self.rings):
            arr = np.asarray(ring, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise BoundaryError(f"ring {idx} is not a sequence of (lon, lat) pairs")
            if arr.shape[0] < 4:
                raise BoundaryError(f"ring {idx} has fewer than 4 points")
            if not np.array_equal(arr[0], arr[-1]):
                raise BoundaryError(f"unclosed ring at index {idx}")
            if not np.all(np.isfinite(arr)):
                raise BoundaryError(f"ring {idx} contains non-finite coordinates")
            rings.append(arr)
        if _ring_self_intersects(rings[0]):
            raise BoundaryError("outer ring is self-intersecting")
        object.__setattr__(self, "rings", tuple(rings))

    @property
    def outer(self) -> np.ndarray:
        return self.rings[0]

    @property
    def holes(self) -> tuple[np.ndarray, ...]:
        return self.rings[1:]

    def centroid(self) -> tuple[float, float]:
        """Mean of the outer ring's vertices (closing vertex dropped)."""
        pts = self.outer[:-1]
        return float(pts[:, 0].mean()), float(pts[:, 1].mean())

    def bounds(self) -> tuple[float, float, float, float]:
        pts = self.outer
        return (
            float(pts[:, 0].min()),
            float(pts[:, 1].min()),
            float(pts[:, 0].max()),
            float(pts[:, 1].max()),
        )


def parse_boundary(geojson_text: str) -> LakeBoundary:
    """Parse a GeoJSON Feature or bare Polygon geometry.

    Coordinates are read in (lon, lat) order; extra vertex dimensions are
    dropped.  MultiPolygon and other geometry types are rejected.
    """
    try:
        doc = json.loads(geojson_text)
    except json.JSONDecodeError as exc:
        raise BoundaryError(f"boundary is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BoundaryError("boundary JSON must be an object")
    geometry = doc.get("geometry") if doc.get("type") == "Feature" else doc
    if not isinstance(geometry, dict):
        raise BoundaryError("Feature carries no geometry object")
    gtype = geometry.get("type")
    if gtype == "MultiPolygon":
        raise BoundaryError("MultiPolygon geometries are not supported; split into Polygons")
    if gtype != "Polygon":
        raise BoundaryError(f"unsupported geometry type {gtype!r}; expected Polygon")
    if "coordinates" not in geometry:
        raise BoundaryError('geometry is missing "coordinates"')
    coords = geometry["coordinates"]
    if not isinstance(coords, list) or not coords:
        raise BoundaryError("Polygon coordinates must be a non-empty list of rings")
    rings = []
    for ring in coords:
        rings.append(np.asarray([[float(p[0]), float(p[1])] for p in ring], dtype=np.float64))
    return LakeBoundary(rings=tuple(rings))


def boundary_to_geojson(boundary: LakeBoundary) -> dict:
    """Boundary as a bare GeoJSON Polygon geometry (inverse of parse_boundary)."""
    return {
        "type": "Polygon",
        "coordinates": [ring.tolist() for ring in boundary.rings],
    }


# ---------------------------------------------------------------------------
# Containment
# ---------------------------------------------------------------------------


def _points_on_ring_edges(x: np.ndarray, y: np.ndarray, ring: np.ndarray) -> np.ndarray:
    on = np.zeros(x.shape, dtype=bool)
    x1, y1 = ring[:-1, 0], ring[:-1, 1]
    x2, y2 = ring[1:, 0], ring[1:, 1]
    for ax, ay, bx, by in zip(x1, y1, x2, y2):
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        within = (
            (x >= min(ax, bx)) & (x <= max(ax, bx))
            & (y >= min(ay, by)) & (y <= max(ay, by))
        )
        on |= (cross == 0.0) & within
    return on


def _ring_crossings(x: np.ndarray, y: np.ndarray, ring: np.ndarray) -> np.ndarray:
    crossings = np.zeros(x.shape, dtype=np.int64)
    x1, y1 = ring[:-1, 0], ring[:-1, 1]
    x2, y2 = ring[1:, 0], ring[1:, 1]
    for ax, ay, bx, by in zip(x1, y1, x2, y2):
        if ay == by:
            continue
        straddles = (ay > y) != (by > y)
        if not np.any(straddles):
            continue
        xi = ax + (y - ay) * (bx - ax) / (by - ay)
        crossings += (straddles & (x < xi)).astype(np.int64)
    return crossings


def points_in_boundary(boundary: LakeBoundary, lon, lat) -> np.ndarray:
    """Vectorized even-odd containment; edge points count as inside."""
    x = np.asarray(lon, dtype=np.float64)
    y = np.asarray(lat, dtype=np.float64)
    crossings = np.zeros(x.shape, dtype=np.int64)
    on_edge = np.zeros(x.shape, dtype=bool)
    for ring in boundary.rings:
        crossings += _ring_crossings(x, y, ring)
        on_edge |= _points_on_ring_edges(x, y, ring)
    return (crossings % 2 == 1) | on_edge


def contains(boundary: LakeBoundary, lon: float, lat: float) -> bool:
    """Even-odd point-in-polygon test for a single point."""
    return bool(points_in_boundary(boundary, np.asarray([lon]), np.asarray([lat]))[0])


def rasterize_mask(boundary: LakeBoundary, template: GeoRaster) -> GeoRaster:
    """Byte mask on the template grid: 1 where the pixel center is inside."""
    if template.crs != CRS_WGS84:
        raise DataError("rasterize_mask needs a geographic (lon/lat) template raster")
    lon, lat = template.pixel_centers()
    inside = points_in_boundary(boundary, lon, lat)
    return GeoRaster(
        samples=inside.astype(np.uint8),
        transform=template.transform,
        crs=template.crs,
        nodata=0.0,
    )


# ---------------------------------------------------------------------------
# Hulls and segment tests
# ---------------------------------------------------------------------------


def convex_hull(points) -> list[tuple[float, float]]:
    """Counter-clockwise convex hull (monotone chain), collinear points dropped.

    Degenerate inputs collapse naturally: one distinct point gives a single
    vertex, collinear points give the two extreme vertices.
    """
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if not pts:
        raise DataError("convex_hull needs at least one point")
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # all input points collinear
        return [pts[0], pts[-1]]
    return hull


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    d1 = orient(p1, p2, q1)
    d2 = orient(p1, p2, q2)
    d3 = orient(q1, q2, p1)
    d4 = orient(q1, q2, p2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and on_segment(p1, p2, q1):
        return True
    if d2 == 0 and on_segment(p1, p2, q2):
        return True
    if d3 == 0 and on_segment(q1, q2, p1):
        return True
    if d4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def _ring_self_intersects(ring: np.ndarray) -> bool:
    n = ring.shape[0] - 1  # closed ring: n edges
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # first and last edge share a vertex
            if _segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]):
                return True
    return False
