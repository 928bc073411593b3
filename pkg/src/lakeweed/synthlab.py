"""Deterministic synthetic scenarios for hermetic end-to-end testing.

A scenario is an elliptical lake with circular vegetation patches.  The
generator emits exactly the file formats the pipeline consumes (reflectance
GeoTIFFs, a boundary GeoJSON, sounding CSVs) plus ``truth.json`` with the
planted geometry, so tests compare against generated truth instead of
hard-coded constants.

Reflectance model (per pixel center, in the lake's local metric frame):

* open water: red = red_edge = 0.03, so the vegetation index is exactly 0;
* inside a patch, red_edge gains 0.02 (medium density) or 0.04 (high);
* a one-pixel fringe around each patch gains 0.01, standing in for the
  density taper at real patch edges (and giving the classifier its low
  class);
* the shore ring, the outermost strip of water inside the lake boundary,
  mimics emergent shoreline growth that saturates the index: red_edge 0.30,
  red 0.05 -- these pixels pass the water test and must be recognised (and
  excluded) as the top intensity class;
* green/NIR make NDWI positive over water (0.05/0.01) and negative over dry
  land (0.02/0.20).

Sounding simulation is flat-bottom: each beam's footprint is offset across
track by bed_depth * tan(beam angle).  Over a patch a ping returns both the
canopy top and the bed; elsewhere just the bed.  Gaussian depth noise is
drawn from a per-scan stream of the scenario seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .geo import CRS_WGS84, AffineTransform, GeoRaster, LocalProjection
from .mission import SurveyPlan
from .sonar import SoundingSet, make_sounding_set
from .spectral import BandSet
from .vector import LakeBoundary

WATER_RED = 0.03
WATER_RED_EDGE = 0.03
PATCH_RED_EDGE_BUMP = {"medium": 0.02, "high": 0.04}
FRINGE_RED_EDGE_BUMP = 0.01
SHORE_RED = 0.05
SHORE_RED_EDGE = 0.30
WATER_GREEN, WATER_NIR = 0.05, 0.01
LAND_GREEN, LAND_NIR = 0.02, 0.20

BED_INTENSITY_DB = 10.0
CANOPY_INTENSITY_DB = 3.0
HARD_TARGET_BONUS_DB = 20.0

BOUNDARY_VERTICES = 64


@dataclass(frozen=True)
class Patch:
    """Circular vegetation patch: center in lon/lat, canopy height in meters."""

    center_lonlat: tuple[float, float]
    radius_m: float
    canopy_height_m: float
    density: str  # "medium" or "high"

    def __post_init__(self) -> None:
        if self.density not in PATCH_RED_EDGE_BUMP:
            raise DataError(f"patch density must be medium or high, got {self.density!r}")
        if not self.radius_m > 0:
            raise DataError(f"patch radius must be positive, got {self.radius_m}")
        if not self.canopy_height_m >= 0:
            raise DataError("canopy height must be non-negative")


@dataclass(frozen=True)
class Scenario:
    seed: int
    lake_center_lonlat: tuple[float, float]
    lake_semi_axes_m: tuple[float, float]
    bed_depth_m: float
    patches: tuple[Patch, ...]
    shore_ring_width_m: float = 20.0
    noise_sigma_m: float = 0.0

    def __post_init__(self) -> None:
        a, b = self.lake_semi_axes_m
        if not (a > 0 and b > 0):
            raise DataError("lake semi-axes must be positive")
        if not 0 <= self.shore_ring_width_m < min(a, b):
            raise DataError("shore ring width must be below the smaller semi-axis")
        if not self.bed_depth_m > 0:
            raise DataError("bed depth must be positive")
        if not self.noise_sigma_m >= 0:
            raise DataError("noise sigma must be non-negative")
        proj = self.projection()
        for i, patch in enumerate(self.patches):
            if patch.canopy_height_m >= self.bed_depth_m:
                raise DataError(
                    f"patch {i}: canopy {patch.canopy_height_m} m reaches above "
                    f"the surface (bed depth {self.bed_depth_m} m)"
                )
            x, y = proj.forward(*patch.center_lonlat)
            reach = math.hypot(x / a, y / b) + patch.radius_m / min(a, b)
            if reach > 1.0:
                raise DataError(f"patch {i} extends outside the lake ellipse")

    def projection(self) -> LocalProjection:
        return LocalProjection(self.lake_center_lonlat[0], self.lake_center_lonlat[1])

    def patch_xy(self, proj: LocalProjection) -> np.ndarray:
        if not self.patches:
            return np.zeros((0, 2))
        xy = [proj.forward(*p.center_lonlat) for p in self.patches]
        return np.asarray(xy, dtype=np.float64)


# ---------------------------------------------------------------------------
# Band and boundary synthesis
# ---------------------------------------------------------------------------


def _ellipse_fraction(x: np.ndarray, y: np.ndarray, a: float, b: float) -> np.ndarray:
    return (x / a) ** 2 + (y / b) ** 2


def generate_boundary(scenario: Scenario) -> LakeBoundary:
    """64-gon tracing the lake ellipse (vertices on the waterline)."""
    proj = scenario.projection()
    a, b = scenario.lake_semi_axes_m
    theta = np.linspace(0.0, 2.0 * math.pi, BOUNDARY_VERTICES, endpoint=False)
    lon, lat = proj.inverse(a * np.cos(theta), b * np.sin(theta))
    ring = np.column_stack([lon, lat])
    ring = np.vstack([ring, ring[:1]])
    return LakeBoundary(rings=(ring,))


def generate_bands(scenario: Scenario, pixel_m: float = 10.0) -> tuple[BandSet, LakeBoundary]:
    """Synthesize the four reflectance rasters plus the lake boundary."""
    proj = scenario.projection()
    a, b = scenario.lake_semi_axes_m
    mx, my = proj.meters_per_degree()
    pw_deg = pixel_m / mx
    ph_deg = pixel_m / my

    margin_m = 3.0 * pixel_m
    half_w = a + margin_m
    half_h = b + margin_m
    width = int(math.ceil(2.0 * half_w / pixel_m))
    height = int(math.ceil(2.0 * half_h / pixel_m))
    transform = AffineTransform(
        origin_x=scenario.lake_center_lonlat[0] - (width / 2.0) * pw_deg,
        origin_y=scenario.lake_center_lonlat[1] + (height / 2.0) * ph_deg,
        pixel_width=pw_deg,
        pixel_height=ph_deg,
    )

    lon, lat = GeoRaster(
        samples=np.zeros((height, width), dtype=np.float32),
        transform=transform,
        crs=CRS_WGS84,
    ).pixel_centers()
    x, y = proj.forward(lon, lat)

    water = _ellipse_fraction(x, y, a, b) <= 1.0
    ring_w = scenario.shore_ring_width_m
    if ring_w > 0:
        inner = _ellipse_fraction(x, y, a - ring_w, b - ring_w) <= 1.0
    else:
        inner = water
    shore_ring = water & ~inner

    red = np.where(water, WATER_RED, SHORE_RED)
    red_edge = np.where(water, WATER_RED_EDGE, SHORE_RED_EDGE)
    red_edge = np.where(shore_ring, SHORE_RED_EDGE, red_edge)
    red = np.where(shore_ring, SHORE_RED, red)

    open_water = inner
    for patch, (px, py) in zip(scenario.patches, scenario.patch_xy(proj)):
        d2 = (x - px) ** 2 + (y - py) ** 2
        core = open_water & (d2 <= patch.radius_m**2)
        fringe = open_water & ~core & (d2 <= (patch.radius_m + pixel_m) ** 2)
        red_edge = np.where(core, red_edge + PATCH_RED_EDGE_BUMP[patch.density], red_edge)
        red_edge = np.where(fringe, red_edge + FRINGE_RED_EDGE_BUMP, red_edge)

    green = np.where(water, WATER_GREEN, LAND_GREEN)
    nir = np.where(water, WATER_NIR, LAND_NIR)

    def raster(values: np.ndarray) -> GeoRaster:
        return GeoRaster(
            samples=values.astype(np.float32), transform=transform, crs=CRS_WGS84
        )

    bands = BandSet(
        red=raster(red), red_edge=raster(red_edge),
        green=raster(green), nir=raster(nir),
    )
    return bands, generate_boundary(scenario)


# ---------------------------------------------------------------------------
# Sounding synthesis
# ---------------------------------------------------------------------------


def generate_soundings(
    scenario: Scenario,
    plan: SurveyPlan,
    ping_spacing_m: float = 0.5,
    beams: int = 256,
    aperture_deg: float = 150.0,
    harvested: bool = False,
    hard_targets: tuple[tuple[float, float, float], ...] = (),
    stream: int = 0,
) -> SoundingSet:
    """Simulate one survey scan along a plan's legs.

    ``hard_targets`` are (lon, lat, radius_m) circles whose bed returns gain
    +20 dB.  ``harvested`` removes all canopies (post-harvest scan).
    ``stream`` separates the noise sequences of repeated scans under one
    scenario seed.
    """
    if beams < 1:
        raise DataError("need at least one beam")
    if not ping_spacing_m > 0:
        raise DataError("ping spacing must be positive")
    proj = scenario.projection()
    rng = np.random.default_rng([scenario.seed & 0xFFFFFFFFFFFFFFFF, stream])

    angles = np.radians(
        -aperture_deg / 2.0 + (np.arange(beams) + 0.5) * (aperture_deg / beams)
    )
    offsets = scenario.bed_depth_m * np.tan(angles)

    foot_x: list[np.ndarray] = []
    foot_y: list[np.ndarray] = []
    ping_ids: list[np.ndarray] = []
    beam_ids: list[np.ndarray] = []
    ping_counter = 0
    for (slon, slat), (elon, elat) in plan.legs:
        sx, sy = proj.forward(slon, slat)
        ex, ey = proj.forward(elon, elat)
        length = math.hypot(ex - sx, ey - sy)
        if length == 0.0:
            continue
        direction = np.array([(ex - sx) / length, (ey - sy) / length])
        normal = np.array([-direction[1], direction[0]])
        n_pings = int(math.floor(length / ping_spacing_m)) + 1
        along = np.arange(n_pings) * ping_spacing_m
        px = sx + along * direction[0]
        py = sy + along * direction[1]
        foot_x.append((px[:, None] + offsets[None, :] * normal[0]).ravel())
        foot_y.append((py[:, None] + offsets[None, :] * normal[1]).ravel())
        ping_ids.append(
            np.repeat(np.arange(ping_counter, ping_counter + n_pings), beams)
        )
        beam_ids.append(np.tile(np.arange(beams), n_pings))
        ping_counter += n_pings

    if not foot_x:
        raise DataError("plan has no legs with positive length")
    x = np.concatenate(foot_x)
    y = np.concatenate(foot_y)
    ping_id = np.concatenate(ping_ids)
    beam_id = np.concatenate(beam_ids)
    n = x.shape[0]

    canopy_height = np.zeros(n)
    if not harvested:
        for patch, (px, py) in zip(scenario.patches, scenario.patch_xy(proj)):
            inside = (x - px) ** 2 + (y - py) ** 2 <= patch.radius_m**2
            canopy_height = np.where(inside, patch.canopy_height_m, canopy_height)

    bed_intensity = np.full(n, BED_INTENSITY_DB)
    for tlon, tlat, tradius in hard_targets:
        tx, ty = proj.forward(tlon, tlat)
        hot = (x - tx) ** 2 + (y - ty) ** 2 <= tradius**2
        bed_intensity = np.where(hot, BED_INTENSITY_DB + HARD_TARGET_BONUS_DB, bed_intensity)

    def noise(count: int) -> np.ndarray:
        if scenario.noise_sigma_m == 0:
            return np.zeros(count)
        return rng.normal(0.0, scenario.noise_sigma_m, count)

    bed_depth = scenario.bed_depth_m + noise(n)
    has_canopy = canopy_height > 0
    idx_canopy = np.nonzero(has_canopy)[0]
    canopy_depth = (
        scenario.bed_depth_m - canopy_height[idx_canopy] + noise(idx_canopy.size)
    )

    all_ping = np.concatenate([ping_id, ping_id[idx_canopy]])
    all_beam = np.concatenate([beam_id, beam_id[idx_canopy]])
    all_x = np.concatenate([x, x[idx_canopy]])
    all_y = np.concatenate([y, y[idx_canopy]])
    all_depth = np.maximum(np.concatenate([bed_depth, canopy_depth]), 1e-6)
    all_intensity = np.concatenate(
        [bed_intensity, np.full(idx_canopy.size, CANOPY_INTENSITY_DB)]
    )

    # stable ping-then-beam order keeps files reproducible and readable
    order = np.lexsort((all_intensity, all_beam, all_ping))
    lon, lat = proj.inverse(all_x[order], all_y[order])
    return make_sounding_set(
        ping_id=all_ping[order], beam_id=all_beam[order],
        lon=lon, lat=lat, value=all_depth[order],
        intensity_db=all_intensity[order], mode="depth",
    )


def scan_plan(
    scenario: Scenario,
    plan: SurveyPlan,
    ping_spacing_m: float,
    harvested: bool,
    hard_targets: tuple[tuple[float, float, float], ...] = (),
) -> SoundingSet:
    """One scan of one plan with a noise stream keyed to (plan, scan phase)."""
    stream = plan.aoi_id * 2 + (1 if harvested else 0)
    return generate_soundings(
        scenario,
        plan,
        ping_spacing_m=ping_spacing_m,
        harvested=harvested,
        hard_targets=hard_targets,
        stream=stream,
    )


def survey_plan_for_patch(
    scenario: Scenario,
    patch_index: int,
    line_spacing_m: float,
    margin_m: float = 5.0,
    aoi_id: int = 0,
    survey_speed_mps: float = 1.5433,
) -> SurveyPlan:
    """East-west lawnmower over one true patch (ground-truth survey).

    Used to exercise the sonar stage independently of satellite detection.
    """
    if not 0 <= patch_index < len(scenario.patches):
        raise DataError(f"no patch with index {patch_index}")
    if not line_spacing_m > 0:
        raise DataError("line spacing must be positive")
    patch = scenario.patches[patch_index]
    proj = scenario.projection()
    cx, cy = proj.forward(*patch.center_lonlat)
    reach = patch.radius_m + margin_m
    n_lines = max(1, math.ceil(2.0 * reach / line_spacing_m))
    start_y = cy - ((n_lines - 1) * line_spacing_m) / 2.0

    legs = []
    total = 0.0
    prev_end: tuple[float, float] | None = None
    for i in range(n_lines):
        yy = start_y + i * line_spacing_m
        x0, x1 = cx - reach, cx + reach
        if i % 2 == 1:
            x0, x1 = x1, x0
        if prev_end is not None:
            total += abs(yy - prev_end[1])
        total += abs(x1 - x0)
        prev_end = (x1, yy)
        legs.append((proj.inverse(x0, yy), proj.inverse(x1, yy)))

    return SurveyPlan(
        aoi_id=aoi_id,
        legs=tuple(legs),
        line_spacing_m=line_spacing_m,
        total_length_m=total,
        est_duration_s=total / survey_speed_mps,
        survey_speed_mps=survey_speed_mps,
    )


# ---------------------------------------------------------------------------
# Scenario and truth serialization
# ---------------------------------------------------------------------------


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "seed": scenario.seed,
        "lake": {
            "center": list(scenario.lake_center_lonlat),
            "semi_axes_m": list(scenario.lake_semi_axes_m),
        },
        "bed_depth_m": scenario.bed_depth_m,
        "shore_ring_width_m": scenario.shore_ring_width_m,
        "noise_sigma_m": scenario.noise_sigma_m,
        "patches": [
            {
                "center": list(p.center_lonlat),
                "radius_m": p.radius_m,
                "canopy_height_m": p.canopy_height_m,
                "density": p.density,
            }
            for p in scenario.patches
        ],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        patches = tuple(
            Patch(
                center_lonlat=(float(p["center"][0]), float(p["center"][1])),
                radius_m=float(p["radius_m"]),
                canopy_height_m=float(p["canopy_height_m"]),
                density=str(p["density"]),
            )
            for p in doc.get("patches", [])
        )
        return Scenario(
            seed=int(doc["seed"]),
            lake_center_lonlat=(
                float(doc["lake"]["center"][0]),
                float(doc["lake"]["center"][1]),
            ),
            lake_semi_axes_m=(
                float(doc["lake"]["semi_axes_m"][0]),
                float(doc["lake"]["semi_axes_m"][1]),
            ),
            bed_depth_m=float(doc["bed_depth_m"]),
            patches=patches,
            shore_ring_width_m=float(doc.get("shore_ring_width_m", 20.0)),
            noise_sigma_m=float(doc.get("noise_sigma_m", 0.0)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataError(f"malformed scenario document: {exc}") from exc


def load_scenario(path) -> Scenario:
    try:
        return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read scenario {path}: {exc}") from exc


def truth_document(scenario: Scenario) -> dict:
    """Ground truth consumed by acceptance checks: planted geometry only."""
    doc = scenario_to_dict(scenario)
    doc["expected_aoi_centroids"] = [list(p.center_lonlat) for p in scenario.patches]
    doc["expected_span_m"] = {
        str(i): p.canopy_height_m for i, p in enumerate(scenario.patches)
    }
    return doc


def write_truth(scenario: Scenario, path) -> None:
    Path(path).write_text(
        json.dumps(truth_document(scenario), indent=2) + "\n", encoding="utf-8"
    )
