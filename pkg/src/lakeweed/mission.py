"""Survey-plan generation over AOIs and before/after harvest comparison.

Plans are lawnmower (boustrophedon) lines: parallel legs along the AOI's
principal axis, spaced by the sonar swath width shrunk by the requested
overlap.  Each leg spans the hull's full extent within its coverage band, so
every hull point is guaranteed to lie within half a line spacing of a leg.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aoi import AreaOfInterest
from .errors import MissionError
from .geo import CRS_WGS84, GeoRaster, LocalProjection

KNOT_MPS = 1852.0 / 3600.0
DEFAULT_SURVEY_SPEED_MPS = 1.5433  # 3 kn
DEFAULT_NOMINAL_DEPTH_M = 2.5      # midpoint of the harvester's working band
DEFAULT_APERTURE_DEG = 150.0
DEFAULT_OVERLAP_FRAC = 0.1


def knots_to_mps(knots: float) -> float:
    return knots * KNOT_MPS


def swath_width(depth_m: float, aperture_deg: float) -> float:
    """Across-track footprint of one ping: 2 * depth * tan(aperture / 2)."""
    if not depth_m > 0:
        raise MissionError(f"depth must be positive, got {depth_m}")
    if not 0 < aperture_deg < 180:
        raise MissionError(f"aperture must be in (0, 180) degrees, got {aperture_deg}")
    return 2.0 * depth_m * math.tan(math.radians(aperture_deg) / 2.0)


@dataclass(frozen=True)
class SurveyPlan:
    """Boustrophedon survey path for one AOI; legs in lon/lat."""

    aoi_id: int
    legs: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    line_spacing_m: float
    total_length_m: float
    est_duration_s: float
    survey_speed_mps: float = DEFAULT_SURVEY_SPEED_MPS
    degenerate: bool = False

    @property
    def leg_count(self) -> int:
        return len(self.legs)

    def path_lonlat(self) -> list[tuple[float, float]]:
        """Leg endpoints in sailing order (connectors are the implied segments)."""
        coords: list[tuple[float, float]] = []
        for start, end in self.legs:
            coords.append(start)
            coords.append(end)
        return coords


def _principal_axis(points: np.ndarray) -> np.ndarray:
    """Unit major-axis direction of a point cloud; isotropic clouds go east."""
    centered = points - points.mean(axis=0)
    cxx = float(np.mean(centered[:, 0] ** 2))
    cyy = float(np.mean(centered[:, 1] ** 2))
    cxy = float(np.mean(centered[:, 0] * centered[:, 1]))
    theta = 0.5 * math.atan2(2.0 * cxy, cxx - cyy)
    return np.array([math.cos(theta), math.sin(theta)])


def _band_extent(
    t: np.ndarray, s: np.ndarray, lo: float, hi: float
) -> tuple[float, float]:
    """Along-leg extent of the hull slice with cross coordinate in [lo, hi]."""
    n = t.shape[0]
    s_vals = list(s[(t >= lo) & (t <= hi)])
    for cut in (lo, hi):
        for i in range(n):
            j = (i + 1) % n
            ta, tb = t[i], t[j]
            if (ta - cut) * (tb - cut) < 0:
                frac = (cut - ta) / (tb - ta)
                s_vals.append(s[i] + frac * (s[j] - s[i]))
    if not s_vals:
        raise MissionError("coverage band misses the hull (degenerate geometry)")
    return float(min(s_vals)), float(max(s_vals))


def plan_survey(
    aoi: AreaOfInterest,
    proj: LocalProjection,
    nominal_depth_m: float = DEFAULT_NOMINAL_DEPTH_M,
    aperture_deg: float = DEFAULT_APERTURE_DEG,
    overlap_frac: float = DEFAULT_OVERLAP_FRAC,
    survey_speed_mps: float = DEFAULT_SURVEY_SPEED_MPS,
) -> SurveyPlan:
    """Lawnmower plan covering the AOI hull.

    Leg direction is the principal axis of the member pixel centers; line
    spacing is the swath width at ``nominal_depth_m`` reduced by
    ``overlap_frac``.  A single-pixel AOI degenerates to one zero-length leg
    at its centroid, flagged on the plan.
    """
    if not 0 <= overlap_frac < 1:
        raise MissionError(f"overlap fraction must be in [0, 1), got {overlap_frac}")
    if not survey_speed_mps > 0:
        raise MissionError(f"survey speed must be positive, got {survey_speed_mps}")
    if aoi.member_count < 1:
        raise MissionError("AOI has no member pixels")
    spacing = swath_width(nominal_depth_m, aperture_deg) * (1.0 - overlap_frac)

    if aoi.member_count == 1:
        point = aoi.centroid_lonlat
        return SurveyPlan(
            aoi_id=aoi.id,
            legs=((point, point),),
            line_spacing_m=spacing,
            total_length_m=0.0,
            est_duration_s=0.0,
            survey_speed_mps=survey_speed_mps,
            degenerate=True,
        )

    ring = aoi.hull_lonlat[:-1]
    hx, hy = proj.forward(ring[:, 0], ring[:, 1])
    hull_xy = np.column_stack([np.atleast_1d(hx), np.atleast_1d(hy)])

    centers = aoi.member_centers_lonlat
    cx, cy = proj.forward(centers[:, 0], centers[:, 1])
    direction = _principal_axis(np.column_stack([np.atleast_1d(cx), np.atleast_1d(cy)]))
    normal = np.array([-direction[1], direction[0]])

    t = hull_xy @ normal
    s = hull_xy @ direction
    t_min, t_max = float(t.min()), float(t.max())
    width = t_max - t_min
    n_legs = max(1, math.ceil(width / spacing)) if width > 0 else 1
    margin = (width - (n_legs - 1) * spacing) / 2.0

    legs_xy: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(n_legs):
        ti = t_min + margin + i * spacing
        lo = max(t_min, ti - spacing / 2.0)
        hi = min(t_max, ti + spacing / 2.0)
        s_lo, s_hi = _band_extent(t, s, lo, hi)
        a = s_lo * direction + ti * normal
        b = s_hi * direction + ti * normal
        legs_xy.append((a, b))

    ordered: list[tuple[np.ndarray, np.ndarray]] = []
    prev_end: np.ndarray | None = None
    for a, b in legs_xy:
        if prev_end is not None and np.linalg.norm(prev_end - b) < np.linalg.norm(
            prev_end - a
        ):
            a, b = b, a
        ordered.append((a, b))
        prev_end = b

    total = 0.0
    prev_end = None
    legs_lonlat = []
    for a, b in ordered:
        if prev_end is not None:
            total += float(np.linalg.norm(a - prev_end))
        total += float(np.linalg.norm(b - a))
        prev_end = b
        legs_lonlat.append((proj.inverse(a[0], a[1]), proj.inverse(b[0], b[1])))

    return SurveyPlan(
        aoi_id=aoi.id,
        legs=tuple(legs_lonlat),
        line_spacing_m=spacing,
        total_length_m=total,
        est_duration_s=total / survey_speed_mps,
        survey_speed_mps=survey_speed_mps,
    )


def plans_to_feature_collection(plans: list[SurveyPlan]) -> dict:
    features = []
    for plan in plans:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [list(c) for c in plan.path_lonlat()],
                },
                "properties": {
                    "aoi_id": plan.aoi_id,
                    "spacing_m": plan.line_spacing_m,
                    "total_length_m": plan.total_length_m,
                    "est_duration_s": plan.est_duration_s,
                    "survey_speed_mps": plan.survey_speed_mps,
                    "leg_count": plan.leg_count,
                    "degenerate": plan.degenerate,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def export_plans(plans: list[SurveyPlan], path) -> None:
    Path(path).write_text(
        json.dumps(plans_to_feature_collection(plans), indent=2) + "\n",
        encoding="utf-8",
    )


def load_plans(path) -> list[SurveyPlan]:
    """Reconstruct plans from an exported FeatureCollection."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MissionError(f"cannot read plans file {path}: {exc}") from exc
    if doc.get("type") != "FeatureCollection":
        raise MissionError(f"{path} is not a FeatureCollection")
    plans = []
    for feature in doc.get("features", []):
        coords = feature.get("geometry", {}).get("coordinates", [])
        props = feature.get("properties", {})
        if len(coords) % 2 != 0:
            raise MissionError(f"{path}: plan path must pair leg endpoints")
        legs = tuple(
            (
                (float(coords[i][0]), float(coords[i][1])),
                (float(coords[i + 1][0]), float(coords[i + 1][1])),
            )
            for i in range(0, len(coords), 2)
        )
        plans.append(
            SurveyPlan(
                aoi_id=int(props["aoi_id"]),
                legs=legs,
                line_spacing_m=float(props["spacing_m"]),
                total_length_m=float(props["total_length_m"]),
                est_duration_s=float(props["est_duration_s"]),
                survey_speed_mps=float(props.get("survey_speed_mps", DEFAULT_SURVEY_SPEED_MPS)),
                degenerate=bool(props.get("degenerate", False)),
            )
        )
    return plans


# ---------------------------------------------------------------------------
# Harvest comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarvestReport:
    mean_diff_m: float
    median_diff_m: float
    stddev_m: float
    valid_cell_count: int
    compared_area_m2: float

    def to_dict(self) -> dict:
        return {
            "mean_diff_m": self.mean_diff_m,
            "median_diff_m": self.median_diff_m,
            "stddev_m": self.stddev_m,
            "valid_cell_count": self.valid_cell_count,
            "compared_area_m2": self.compared_area_m2,
        }


def _cell_area_m2(raster: GeoRaster, proj: LocalProjection | None) -> float:
    t = raster.transform
    if raster.crs == CRS_WGS84:
        lat_mid = t.origin_y - (raster.height / 2.0) * t.pixel_height
        mx = 6378137.0 * math.radians(1.0) * math.cos(math.radians(lat_mid))
        my = 6378137.0 * math.radians(1.0)
        return (t.pixel_width * mx) * (t.pixel_height * my)
    return t.pixel_width * t.pixel_height


def harvest_diff(
    before: GeoRaster,
    after: GeoRaster,
    region=None,
    proj: LocalProjection | None = None,
) -> HarvestReport:
    """Statistics of before - after over cells valid in both rasters.

    ``after`` is resampled to ``before``'s grid by nearest neighbor.  When a
    lon/lat ``region`` boundary is given for rasters in the local metric
    frame, ``proj`` must map the frame back to lon/lat.
    """
    if before.crs != after.crs:
        raise MissionError(f"CRS mismatch: {before.crs} vs {after.crs}")
    if not (before.is_float and after.is_float):
        raise MissionError("harvest_diff expects float rasters")

    x, y = before.pixel_centers()
    col, row = after.transform.world_to_cell(x, y)
    in_bounds = (col >= 0) & (col < after.width) & (row >= 0) & (row < after.height)
    col_c = np.clip(col, 0, after.width - 1)
    row_c = np.clip(row, 0, after.height - 1)
    after_vals = after.samples[row_c, col_c].astype(np.float64)
    valid = before.valid_mask() & in_bounds & after.valid_mask()[row_c, col_c]

    if region is not None:
        from .vector import points_in_boundary

        if before.crs == CRS_WGS84:
            lon, lat = x, y
        else:
            if proj is None:
                raise MissionError(
                    "region filtering on metric rasters needs the local projection"
                )
            lon, lat = proj.inverse(x, y)
        valid &= points_in_boundary(region, lon, lat)

    if not np.any(valid):
        raise MissionError("no comparable cells")

    diff = before.samples.astype(np.float64)[valid] - after_vals[valid]
    return HarvestReport(
        mean_diff_m=float(np.mean(diff)),
        median_diff_m=float(np.median(diff)),
        stddev_m=float(np.std(diff)),
        valid_cell_count=int(diff.size),
        compared_area_m2=float(diff.size) * _cell_area_m2(before, proj),
    )
