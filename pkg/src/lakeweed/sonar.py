"""Sounding ingestion, depth correction, gating and span gridding.

Depths are meters below the water surface, positive down.  Files arrive in
one of two column layouts (mode is file-wide): measured depths, or raw
two-way travel times that still need the sound-velocity correction.

The span grid bins gated soundings into square metric cells and keeps, per
cell, the shallowest and deepest return, the return count and the running
mean backscatter.  The vegetation height ("span") layer is deepest minus
shallowest; with a canopy present the shallowest return comes off the plant
tops and the deepest off the lakebed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import SoundingError
from .geo import CRS_LOCAL, AffineTransform, GeoRaster, LocalProjection

DEPTH_HEADER = ["ping_id", "beam_id", "lon", "lat", "depth_m", "intensity_db"]
TWTT_HEADER = ["ping_id", "beam_id", "lon", "lat", "twtt_s", "intensity_db"]

MAX_BEAMS = 256


class Sounding(NamedTuple):
    """One sonar return (convenience view; bulk data stays columnar)."""

    ping_id: int
    beam_id: int
    lon: float
    lat: float
    value: float          # depth_m or twtt_s depending on the set's mode
    intensity_db: float


@dataclass(frozen=True)
class SoundingSet:
    """Columnar batch of returns; ``mode`` is 'depth' or 'twtt'."""

    ping_id: np.ndarray
    beam_id: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    value: np.ndarray
    intensity_db: np.ndarray
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in ("depth", "twtt"):
            raise SoundingError(f"unknown sounding mode {self.mode!r}")
        n = self.ping_id.shape[0]
        for name in ("beam_id", "lon", "lat", "value", "intensity_db"):
            if getattr(self, name).shape != (n,):
                raise SoundingError(f"column {name} length differs from ping_id")

    def __len__(self) -> int:
        return int(self.ping_id.shape[0])

    def __getitem__(self, i: int) -> Sounding:
        return Sounding(
            int(self.ping_id[i]), int(self.beam_id[i]),
            float(self.lon[i]), float(self.lat[i]),
            float(self.value[i]), float(self.intensity_db[i]),
        )

    @property
    def depth_m(self) -> np.ndarray:
        if self.mode != "depth":
            raise SoundingError("sounding set holds travel times, not depths")
        return self.value

    @property
    def twtt_s(self) -> np.ndarray:
        if self.mode != "twtt":
            raise SoundingError("sounding set holds depths, not travel times")
        return self.value

    def take(self, mask: np.ndarray) -> "SoundingSet":
        return SoundingSet(
            ping_id=self.ping_id[mask], beam_id=self.beam_id[mask],
            lon=self.lon[mask], lat=self.lat[mask],
            value=self.value[mask], intensity_db=self.intensity_db[mask],
            mode=self.mode,
        )


def make_sounding_set(ping_id, beam_id, lon, lat, value, intensity_db, mode) -> SoundingSet:
    """Build a validated SoundingSet from array-likes."""
    s = SoundingSet(
        ping_id=np.asarray(ping_id, dtype=np.int64),
        beam_id=np.asarray(beam_id, dtype=np.int64),
        lon=np.asarray(lon, dtype=np.float64),
        lat=np.asarray(lat, dtype=np.float64),
        value=np.asarray(value, dtype=np.float64),
        intensity_db=np.asarray(intensity_db, dtype=np.float64),
        mode=mode,
    )
    _validate_columns(s)
    return s


def _validate_columns(s: SoundingSet, line_of=None) -> None:
    """Raise naming the first offending file line (via line_of) or index."""

    def where(mask: np.ndarray, problem: str) -> None:
        bad = np.nonzero(mask)[0]
        if bad.size:
            i = int(bad[0])
            loc = f"line {line_of(i)}" if line_of is not None else f"row {i}"
            raise SoundingError(f"{problem} at {loc}")

    for name in ("lon", "lat", "value", "intensity_db"):
        where(~np.isfinite(getattr(s, name)), f"non-finite {name}")
    where((s.beam_id < 0) | (s.beam_id >= MAX_BEAMS),
          f"beam_id outside 0..{MAX_BEAMS - 1}")
    if s.mode == "depth":
        where(s.value <= 0, "non-positive depth_m")
    else:
        where(s.value <= 0, "non-positive twtt_s")


def _locate_bad_field(path: Path) -> str:
    """Slow pass to name the first malformed CSV line for diagnostics."""
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            for value in row:
                try:
                    float(value)
                except ValueError:
                    return f"line {lineno}"
    return "unknown line"


def read_soundings(path) -> SoundingSet:
    """Parse a sounding CSV; the header decides depth vs travel-time mode."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        header_line = fh.readline()
    header = [h.strip() for h in header_line.strip().split(",")] if header_line.strip() else []
    has_depth = "depth_m" in header
    has_twtt = "twtt_s" in header
    if has_depth and has_twtt:
        raise SoundingError(
            f"{path}: mixed mode header (both depth_m and twtt_s present)"
        )
    if not has_depth and not has_twtt:
        raise SoundingError(
            f"{path}: header must list depth_m or twtt_s, got {header}"
        )
    expected = DEPTH_HEADER if has_depth else TWTT_HEADER
    unknown = [c for c in header if c not in expected]
    if unknown:
        raise SoundingError(f"{path}: unknown column {unknown[0]!r}")
    missing = [c for c in expected if c not in header]
    if missing:
        raise SoundingError(f"{path}: missing column {missing[0]!r}")

    import pandas as pd

    try:
        frame = pd.read_csv(path, dtype=np.float64)
    except (ValueError, pd.errors.ParserError) as exc:
        raise SoundingError(
            f"{path}: non-numeric or missing value at {_locate_bad_field(path)}"
        ) from exc
    if frame.empty:
        raise SoundingError(f"{path}: no data rows")
    if frame.isna().to_numpy().any():
        bad = int(np.nonzero(frame.isna().to_numpy().any(axis=1))[0][0])
        raise SoundingError(f"{path}: non-numeric or missing value at line {bad + 2}")

    s = SoundingSet(
        ping_id=frame["ping_id"].to_numpy(np.int64),
        beam_id=frame["beam_id"].to_numpy(np.int64),
        lon=frame["lon"].to_numpy(np.float64),
        lat=frame["lat"].to_numpy(np.float64),
        value=frame["depth_m" if has_depth else "twtt_s"].to_numpy(np.float64),
        intensity_db=frame["intensity_db"].to_numpy(np.float64),
        mode="depth" if has_depth else "twtt",
    )
    _validate_columns(s, line_of=lambda i: i + 2)
    return s


def write_soundings(s: SoundingSet, path) -> None:
    """Write the canonical CSV layout (shortest round-trip float repr)."""
    import pandas as pd

    header = DEPTH_HEADER if s.mode == "depth" else TWTT_HEADER
    frame = pd.DataFrame(
        {
            header[0]: s.ping_id,
            header[1]: s.beam_id,
            header[2]: s.lon,
            header[3]: s.lat,
            header[4]: s.value,
            header[5]: s.intensity_db,
        }
    )
    frame.to_csv(Path(path), index=False, lineterminator="\n")


# ---------------------------------------------------------------------------
# Sound velocity correction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoundVelocityProfile:
    """Piecewise-constant speed vs depth: samples[i] rules [depth_i, depth_i+1)."""

    samples: tuple[tuple[float, float], ...]
    nominal_speed: float = 1500.0

    def __post_init__(self) -> None:
        if not self.samples:
            raise SoundingError("velocity profile needs at least one sample")
        depths = [d for d, _ in self.samples]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise SoundingError("velocity profile depths must be strictly increasing")
        for _, speed in self.samples:
            if not 1300.0 <= speed <= 1700.0:
                raise SoundingError(
                    f"velocity {speed} m/s outside plausible water range [1300, 1700]"
                )

    @property
    def is_uniform(self) -> bool:
        return len({speed for _, speed in self.samples}) == 1


def read_velocity_profile(path, nominal_speed: float = 1500.0) -> SoundVelocityProfile:
    """Two-column CSV ``depth_m,speed_mps`` with a header row."""
    path = Path(path)
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["depth_m", "speed_mps"]:
            raise SoundingError(f"{path}: expected header depth_m,speed_mps")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise SoundingError(f"{path}: malformed row at line {lineno}") from exc
    return SoundVelocityProfile(samples=tuple(rows), nominal_speed=nominal_speed)


def _harmonic_mean_speed(depths: np.ndarray, svp: SoundVelocityProfile) -> np.ndarray:
    """Depth-weighted harmonic mean speed of the water column above ``depths``."""
    if svp.is_uniform:
        # single constant speed: the mean is that speed, bit-exactly
        return np.full(depths.shape, svp.samples[0][1], dtype=np.float64)
    bounds = [d for d, _ in svp.samples] + [math.inf]
    speeds = [s for _, s in svp.samples]
    # the first sample's speed also covers any water above its depth
    travel_time = np.minimum(depths, bounds[0]) / speeds[0]
    for i, speed in enumerate(speeds):
        lo, hi = bounds[i], bounds[i + 1]
        thickness = np.clip(depths, lo, hi) - lo
        travel_time += thickness / speed
    return depths / travel_time


def svp_correct(s: SoundingSet, svp: SoundVelocityProfile) -> SoundingSet:
    """Convert travel times to depths through the velocity profile.

    Single pass: the nominal depth (twtt/2 x nominal speed) selects the water
    column slice whose harmonic-mean speed rescales the travel time.  No
    iterative refinement and no ray bending, which is negligible at the 1-5 m
    depths gated here.
    """
    if s.mode != "twtt":
        raise SoundingError("svp_correct expects travel-time soundings")
    if np.any(s.value <= 0):
        raise SoundingError("twtt_s must be positive")
    half_time = s.value / 2.0
    nominal_depth = half_time * svp.nominal_speed
    depth = half_time * _harmonic_mean_speed(nominal_depth, svp)
    return SoundingSet(
        ping_id=s.ping_id, beam_id=s.beam_id, lon=s.lon, lat=s.lat,
        value=depth, intensity_db=s.intensity_db, mode="depth",
    )


# ---------------------------------------------------------------------------
# Gating
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateConfig:
    """Inclusive depth window that keeps the vegetation layer."""

    upper_m: float = 1.0
    lower_m: float = 5.0

    def __post_init__(self) -> None:
        if not (0 < self.upper_m < self.lower_m):
            raise SoundingError(
                f"gates must satisfy 0 < upper < lower, got "
                f"({self.upper_m}, {self.lower_m})"
            )


class DroppedCounts(NamedTuple):
    above: int   # shallower than the upper gate (surface noise)
    below: int   # deeper than the lower gate (sub-bottom noise)


def gate_filter(s: SoundingSet, gates: GateConfig) -> tuple[SoundingSet, DroppedCounts]:
    """Keep soundings with upper_m <= depth <= lower_m (bounds inclusive)."""
    depth = s.depth_m
    above = depth < gates.upper_m
    below = depth > gates.lower_m
    kept = s.take(~(above | below))
    return kept, DroppedCounts(above=int(above.sum()), below=int(below.sum()))


# ---------------------------------------------------------------------------
# Gridding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpanGrid:
    """Per-cell reduction of gated soundings on a square metric grid.

    Arrays are (rows, cols) with row 0 at the north edge; ``col0``/``row_top``
    are the integer cell indices (floor(x/res), floor(y/res)) of the
    north-west grid corner cell.
    """

    resolution_m: float
    col0: int
    row_top: int
    depth_min: np.ndarray         # shallowest return per cell (NaN when empty)
    depth_max: np.ndarray         # deepest return per cell
    count: np.ndarray             # returns per cell
    mean_intensity_db: np.ndarray
    proj: LocalProjection

    @property
    def shape(self) -> tuple[int, int]:
        return self.count.shape

    @property
    def transform(self) -> AffineTransform:
        return AffineTransform(
            origin_x=self.col0 * self.resolution_m,
            origin_y=(self.row_top + 1) * self.resolution_m,
            pixel_width=self.resolution_m,
            pixel_height=self.resolution_m,
        )

    def occupied(self) -> np.ndarray:
        return self.count > 0

    def cell_center_lonlat(self, col: int, row: int) -> tuple[float, float]:
        x, y = self.transform.pixel_to_world(col, row)
        return self.proj.inverse(x, y)


def build_span_grid(
    s: SoundingSet, proj: LocalProjection, resolution_m: float = 0.1
) -> SpanGrid:
    """Bin depth-mode soundings into cells of ``resolution_m`` meters.

    The reduction per cell (min, max, count, mean intensity) is associative
    and commutative, so any partitioning of the input yields the same grid.
    """
    if s.mode != "depth":
        raise SoundingError("span grid needs depth-mode soundings")
    if len(s) == 0:
        raise SoundingError("no soundings after gating")
    if not resolution_m > 0:
        raise SoundingError(f"resolution must be positive, got {resolution_m}")

    x, y = proj.forward(s.lon, s.lat)
    cx = np.floor(x / resolution_m).astype(np.int64)
    cy = np.floor(y / resolution_m).astype(np.int64)
    col0 = int(cx.min())
    row_top = int(cy.max())
    cols = cx - col0
    rows = row_top - cy
    n_cols = int(cx.max()) - col0 + 1
    n_rows = row_top - int(cy.min()) + 1

    flat = rows * n_cols + cols
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    depth_sorted = s.depth_m[order]
    intensity_sorted = s.intensity_db[order]
    starts = np.flatnonzero(np.diff(flat_sorted)) + 1
    starts = np.concatenate([[0], starts])
    cell_ids = flat_sorted[starts]

    depth_min = np.full(n_rows * n_cols, np.nan)
    depth_max = np.full(n_rows * n_cols, np.nan)
    count = np.zeros(n_rows * n_cols, dtype=np.int64)
    mean_intensity = np.full(n_rows * n_cols, np.nan)

    depth_min[cell_ids] = np.minimum.reduceat(depth_sorted, starts)
    depth_max[cell_ids] = np.maximum.reduceat(depth_sorted, starts)
    counts_per_cell = np.add.reduceat(np.ones_like(depth_sorted), starts)
    count[cell_ids] = counts_per_cell.astype(np.int64)
    mean_intensity[cell_ids] = (
        np.add.reduceat(intensity_sorted, starts) / counts_per_cell
    )

    shape = (n_rows, n_cols)
    return SpanGrid(
        resolution_m=float(resolution_m),
        col0=col0,
        row_top=row_top,
        depth_min=depth_min.reshape(shape),
        depth_max=depth_max.reshape(shape),
        count=count.reshape(shape),
        mean_intensity_db=mean_intensity.reshape(shape),
        proj=proj,
    )


def _grid_layer(grid: SpanGrid, values: np.ndarray) -> GeoRaster:
    samples = np.where(grid.occupied(), values, np.nan).astype(np.float32)
    return GeoRaster(samples=samples, transform=grid.transform, crs=CRS_LOCAL)


def span_layer(grid: SpanGrid) -> GeoRaster:
    """Vegetation height: deepest minus shallowest return per occupied cell."""
    return _grid_layer(grid, grid.depth_max - grid.depth_min)


def bathy_layer(grid: SpanGrid) -> GeoRaster:
    """Estimated lakebed: the deepest return per occupied cell."""
    return _grid_layer(grid, grid.depth_max)


def backscatter_layer(grid: SpanGrid) -> GeoRaster:
    """Mean backscatter intensity (dB) per occupied cell."""
    return _grid_layer(grid, grid.mean_intensity_db)


# ---------------------------------------------------------------------------
# Hard-target advisory
# ---------------------------------------------------------------------------


class HardTargetCell(NamedTuple):
    col: int
    row: int
    lon: float
    lat: float
    mean_intensity_db: float


def flag_hard_targets(grid: SpanGrid, intensity_threshold_db: float) -> list[HardTargetCell]:
    """Cells whose mean backscatter reaches the threshold, for manual review.

    Purely advisory: nothing is masked in any exported layer; the operator
    decides what to avoid.
    """
    hot = grid.occupied() & (grid.mean_intensity_db >= intensity_threshold_db)
    report = []
    for row, col in zip(*np.nonzero(hot)):
        lon, lat = grid.cell_center_lonlat(int(col), int(row))
        report.append(
            HardTargetCell(
                col=int(col), row=int(row), lon=lon, lat=lat,
                mean_intensity_db=float(grid.mean_intensity_db[row, col]),
            )
        )
    return report
