"""Two-stage clustering: intensity classes, then spatial areas of interest.

Stage one clusters the byte index *values* (weighted by pixel count, which is
mathematically identical to clustering every pixel) into five density
classes: 1 none, 2 low, 3 medium, 4 high, 5 shore.  The top class catches
shoreline pixels whose index saturates like terrestrial vegetation, so only
the medium and high classes feed stage two.  Stage two clusters the selected
pixel centers spatially (in the local metric frame) into areas of interest
sized for one harvester visit each.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ClusterError, DataError
from .geo import GeoRaster, LocalProjection
from .kmeans import KMeansConfig, kmeans
from .spectral import SavIndexRaster
from .vector import convex_hull

logger = logging.getLogger(__name__)

CLASS_NONE = 1
CLASS_LOW = 2
CLASS_MEDIUM = 3
CLASS_HIGH = 4
CLASS_SHORE = 5

DEFAULT_SELECTED_CLASSES = (CLASS_MEDIUM, CLASS_HIGH)
CLASS_NAMES = {
    CLASS_NONE: "none",
    CLASS_LOW: "low",
    CLASS_MEDIUM: "medium",
    CLASS_HIGH: "high",
    CLASS_SHORE: "shore",
}


@dataclass(frozen=True)
class IntensityClassMap:
    """Byte raster of density labels 1..k (0 = nodata) plus sorted centroids."""

    classes: GeoRaster
    centroids: np.ndarray  # ascending byte-value centroids, one per label

    def label_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.classes.samples, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts) if v != 0}


@dataclass(frozen=True)
class AreaOfInterest:
    """One spatial cluster of selected-density pixels."""

    id: int
    centroid_lonlat: tuple[float, float]
    member_pixels: np.ndarray          # (n, 2) of (col, row)
    member_centers_lonlat: np.ndarray  # (n, 2) pixel centers in lon/lat
    hull_lonlat: np.ndarray            # closed (m, 2) ring
    area_m2: float
    class_counts: dict[str, int]

    @property
    def member_count(self) -> int:
        return int(self.member_pixels.shape[0])


def classify_intensity(index: SavIndexRaster, cfg: KMeansConfig) -> IntensityClassMap:
    """Cluster the index histogram into cfg.k ordered density classes.

    Labels are assigned in ascending centroid order; each valid pixel gets
    the label of its nearest centroid, ties resolved to the lower label.
    """
    valid = index.valid_mask()
    values = index.scaled.samples[valid].astype(np.float64)
    unique, counts = np.unique(values, return_counts=True)
    if unique.size < cfg.k:
        raise ClusterError(
            f"only {unique.size} distinct index values present; "
            f"need at least {cfg.k} (or run with a smaller class count)"
        )
    result = kmeans(unique[:, None], weights=counts.astype(np.float64), cfg=cfg)
    order = np.argsort(result.centroids[:, 0], kind="stable")
    centroids = result.centroids[order, 0]

    # label of each distinct value: nearest sorted centroid, ties to the lower label
    dist = np.abs(unique[:, None] - centroids[None, :])
    value_label = np.argmin(dist, axis=1) + 1

    lut = np.zeros(256, dtype=np.uint8)
    lut[unique.astype(np.intp)] = value_label.astype(np.uint8)
    labels = np.zeros(index.scaled.samples.shape, dtype=np.uint8)
    labels[valid] = lut[index.scaled.samples[valid]]

    grid = index.scaled
    return IntensityClassMap(
        classes=GeoRaster(
            samples=labels, transform=grid.transform, crs=grid.crs, nodata=0.0
        ),
        centroids=centroids,
    )


def _pixel_area_m2(raster: GeoRaster, proj: LocalProjection) -> float:
    mx, my = proj.meters_per_degree()
    return (raster.transform.pixel_width * mx) * (raster.transform.pixel_height * my)


def _closed_ring(points: list[tuple[float, float]]) -> np.ndarray:
    ring = np.asarray(points + [points[0]], dtype=np.float64)
    return ring


def _footprint_ring(cols: np.ndarray, rows: np.ndarray, raster: GeoRaster) -> np.ndarray:
    """Convex hull over the member pixels' corner points (always a polygon)."""
    t = raster.transform
    corners_x = []
    corners_y = []
    for dc, dr in ((0, 0), (1, 0), (0, 1), (1, 1)):
        corners_x.append(t.origin_x + (cols + dc) * t.pixel_width)
        corners_y.append(t.origin_y - (rows + dr) * t.pixel_height)
    pts = np.column_stack([np.concatenate(corners_x), np.concatenate(corners_y)])
    hull = convex_hull(pts)
    return _closed_ring(hull)


def _hull_ring(cols: np.ndarray, rows: np.ndarray, raster: GeoRaster) -> np.ndarray:
    """Hull of member pixel centers; pixel-footprint hull when degenerate."""
    lon, lat = raster.transform.pixel_to_world(cols, rows)
    hull = convex_hull(np.column_stack([np.atleast_1d(lon), np.atleast_1d(lat)]))
    if len(hull) >= 3:
        return _closed_ring(hull)
    return _footprint_ring(cols, rows, raster)


def extract_aois(
    class_map: IntensityClassMap,
    proj: LocalProjection,
    cfg: KMeansConfig,
    selected_classes: tuple[int, ...] = DEFAULT_SELECTED_CLASSES,
    min_members: int = 1,
) -> list[AreaOfInterest]:
    """Spatially cluster selected-density pixels into areas of interest.

    Returns AOIs sorted by descending member count, ids 1-based in that
    order.  An empty selection yields an empty list, not an error.
    """
    raster = class_map.classes
    sel = np.isin(raster.samples, np.asarray(selected_classes, dtype=np.uint8))
    rows, cols = np.nonzero(sel)
    if rows.size == 0:
        return []

    lon, lat = raster.transform.pixel_to_world(cols, rows)
    x, y = proj.forward(lon, lat)
    points = np.column_stack([np.atleast_1d(x), np.atleast_1d(y)])

    result = kmeans(points, cfg=cfg)
    if result.k_reduced:
        logger.info(
            "spatial clustering reduced k from %d to %d (only %d pixels selected)",
            result.k_requested, result.k, points.shape[0],
        )

    pixel_area = _pixel_area_m2(raster, proj)
    clusters = []
    for j in range(result.k):
        members = np.nonzero(result.assignment == j)[0]
        if members.size < max(min_members, 1):
            continue
        clusters.append((int(members.size), j, members))
    clusters.sort(key=lambda item: (-item[0], item[1]))

    aois = []
    for ordinal, (count, _, members) in enumerate(clusters, start=1):
        mcols = cols[members]
        mrows = rows[members]
        mean_x = float(points[members, 0].mean())
        mean_y = float(points[members, 1].mean())
        centroid = proj.inverse(mean_x, mean_y)
        mlon, mlat = raster.transform.pixel_to_world(mcols, mrows)
        labels = raster.samples[mrows, mcols]
        class_counts = {
            CLASS_NAMES.get(int(lbl), str(int(lbl))): int(n)
            for lbl, n in zip(*np.unique(labels, return_counts=True))
        }
        aois.append(
            AreaOfInterest(
                id=ordinal,
                centroid_lonlat=(float(centroid[0]), float(centroid[1])),
                member_pixels=np.column_stack([mcols, mrows]),
                member_centers_lonlat=np.column_stack(
                    [np.atleast_1d(mlon), np.atleast_1d(mlat)]
                ),
                hull_lonlat=_hull_ring(mcols, mrows, raster),
                area_m2=count * pixel_area,
                class_counts=class_counts,
            )
        )
    return aois


def aois_to_feature_collection(
    aois: list[AreaOfInterest], local_frame: LocalProjection | None = None
) -> dict:
    features = []
    for aoi in aois:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [aoi.hull_lonlat.tolist()],
                },
                "properties": {
                    "id": aoi.id,
                    "centroid": list(aoi.centroid_lonlat),
                    "area_m2": aoi.area_m2,
                    "member_count": aoi.member_count,
                    "class_counts": aoi.class_counts,
                },
            }
        )
    doc: dict = {"type": "FeatureCollection", "features": features}
    if local_frame is not None:
        doc["local_frame"] = {"lon0": local_frame.lon0, "lat0": local_frame.lat0}
    return doc


def export_aois(
    aois: list[AreaOfInterest], path, local_frame: LocalProjection | None = None
) -> None:
    """Write AOIs as a GeoJSON FeatureCollection of polygon hulls."""
    doc = aois_to_feature_collection(aois, local_frame)
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write AOI file {path}: {exc}") from exc


def load_aois(path) -> tuple[list[dict], LocalProjection | None]:
    """Read back an exported AOI FeatureCollection (features as dicts)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read AOI file {path}: {exc}") from exc
    if doc.get("type") != "FeatureCollection":
        raise DataError(f"{path} is not a FeatureCollection")
    frame = None
    if "local_frame" in doc:
        frame = LocalProjection(doc["local_frame"]["lon0"], doc["local_frame"]["lat0"])
    return doc.get("features", []), frame
