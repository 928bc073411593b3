"""Georeferenced raster model and coordinate transforms.

Conventions used throughout the pipeline:

* Pixel (col, row) addresses sample centers; ``pixel_to_world`` therefore
  offsets by half a pixel.  The raster origin is the *outer corner* of pixel
  (0, 0), i.e. its north-west corner, and world y decreases as row grows.
* Two coordinate reference frames are supported: geographic WGS84 lon/lat
  (``CRS_WGS84``) and a local metric frame (``CRS_LOCAL``) anchored by a
  :class:`LocalProjection` at the lake center.
* Float rasters mark missing samples with NaN; byte rasters reserve 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

CRS_WGS84 = "EPSG:4326"
CRS_LOCAL = "LOCAL"

EARTH_RADIUS_M = 6378137.0


@dataclass(frozen=True)
class AffineTransform:
    """North-up affine georeferencing: origin at the outer corner of pixel (0,0)."""

    origin_x: float
    origin_y: float
    pixel_width: float
    pixel_height: float

    def __post_init__(self) -> None:
        if not (self.pixel_width > 0 and self.pixel_height > 0):
            raise DataError(
                f"pixel size must be positive, got "
                f"({self.pixel_width}, {self.pixel_height})"
            )

    def pixel_to_world(self, col, row):
        """World coordinates of the center of pixel (col, row).

        Accepts scalars or numpy arrays.
        """
        x = self.origin_x + (np.asarray(col) + 0.5) * self.pixel_width
        y = self.origin_y - (np.asarray(row) + 0.5) * self.pixel_height
        if np.ndim(col) == 0 and np.ndim(row) == 0:
            return float(x), float(y)
        return x, y

    def world_to_pixel(self, x, y):
        """Fractional (col, row) whose center maps back to (x, y)."""
        col = (np.asarray(x) - self.origin_x) / self.pixel_width - 0.5
        row = (self.origin_y - np.asarray(y)) / self.pixel_height - 0.5
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            return float(col), float(row)
        return col, row

    def world_to_cell(self, x, y):
        """Integer (col, row) of the pixel whose footprint contains (x, y)."""
        col = np.floor((np.asarray(x) - self.origin_x) / self.pixel_width).astype(np.int64)
        row = np.floor((self.origin_y - np.asarray(y)) / self.pixel_height).astype(np.int64)
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            return int(col), int(row)
        return col, row


def pixel_to_world(t: AffineTransform, col, row):
    """Module-level alias of :meth:`AffineTransform.pixel_to_world`."""
    return t.pixel_to_world(col, row)


def world_to_pixel(t: AffineTransform, x, y):
    """Module-level alias of :meth:`AffineTransform.world_to_pixel`."""
    return t.world_to_pixel(x, y)


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular metric frame about a reference point.

    forward maps (lon, lat) degrees to meters east/north of the reference;
    distortion is below a centimeter for lakes a few kilometers across, which
    is why no full map projection library is needed here.
    """

    lon0: float
    lat0: float
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lon0) and math.isfinite(self.lat0)):
            raise DataError("projection reference must be finite")
        if abs(self.lat0) >= 89.0:
            raise DataError(f"reference latitude {self.lat0} too close to a pole")

    @property
    def _cos_lat0(self) -> float:
        return math.cos(math.radians(self.lat0))

    def forward(self, lon, lat):
        """(lon, lat) degrees -> (x, y) meters. Scalars or arrays."""
        lon = np.asarray(lon, dtype=np.float64)
        lat = np.asarray(lat, dtype=np.float64)
        if not (np.all(np.isfinite(lon)) and np.all(np.isfinite(lat))):
            raise DataError("non-finite coordinate passed to local projection")
        x = self.earth_radius * np.radians(lon - self.lon0) * self._cos_lat0
        y = self.earth_radius * np.radians(lat - self.lat0)
        if lon.ndim == 0 and lat.ndim == 0:
            return float(x), float(y)
        return x, y

    def inverse(self, x, y):
        """(x, y) meters -> (lon, lat) degrees. Scalars or arrays."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        lon = self.lon0 + np.degrees(x / (self.earth_radius * self._cos_lat0))
        lat = self.lat0 + np.degrees(y / self.earth_radius)
        if x.ndim == 0 and y.ndim == 0:
            return float(lon), float(lat)
        return lon, lat

    def meters_per_degree(self) -> tuple[float, float]:
        """Local scale: meters per degree of longitude and of latitude."""
        return (
            self.earth_radius * math.radians(1.0) * self._cos_lat0,
            self.earth_radius * math.radians(1.0),
        )


@dataclass(frozen=True)
class GeoRaster:
    """Single-band georeferenced grid, float32 or uint8, immutable by convention.

    ``samples`` is a (height, width) row-major array.  Float rasters use NaN
    for nodata unless another sentinel is set; byte rasters reserve 0.
    """

    samples: np.ndarray
    transform: AffineTransform
    crs: str
    nodata: float = field(default=math.nan)

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples)
        if arr.ndim != 2:
            raise DataError(f"raster samples must be 2-D, got shape {arr.shape}")
        if arr.dtype == np.float64:
            arr = arr.astype(np.float32)
        if arr.dtype not in (np.dtype(np.float32), np.dtype(np.uint8)):
            raise DataError(f"unsupported sample dtype {arr.dtype}; use float32 or uint8")
        if arr.size == 0:
            raise DataError("raster must be non-empty")
        object.__setattr__(self, "samples", arr)
        if self.crs not in (CRS_WGS84, CRS_LOCAL):
            raise DataError(f"unsupported CRS tag {self.crs!r}")
        if arr.dtype == np.uint8:
            nd = self.nodata
            if math.isnan(nd):
                nd = 0.0
            if nd != int(nd) or not (0 <= nd <= 255):
                raise DataError(f"byte raster nodata must be an integer 0..255, got {nd}")
            object.__setattr__(self, "nodata", float(int(nd)))
        else:
            valid = arr[~np.isnan(arr)]
            if not math.isnan(self.nodata):
                valid = valid[valid != np.float32(self.nodata)]
            if valid.size and not np.all(np.isfinite(valid)):
                raise DataError("float raster contains non-finite samples besides nodata")

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def is_float(self) -> bool:
        return self.samples.dtype == np.float32

    def valid_mask(self) -> np.ndarray:
        """Boolean (height, width) mask of samples that carry data."""
        if self.is_float:
            if math.isnan(self.nodata):
                return ~np.isnan(self.samples)
            return (self.samples != np.float32(self.nodata)) & ~np.isnan(self.samples)
        return self.samples != np.uint8(int(self.nodata))

    def same_grid(self, other: "GeoRaster", tol: float = 1e-9) -> bool:
        """True when shapes, CRS and transforms agree (transforms within tol)."""
        if self.samples.shape != other.samples.shape or self.crs != other.crs:
            return False
        a, b = self.transform, other.transform
        return (
            abs(a.origin_x - b.origin_x) <= tol
            and abs(a.origin_y - b.origin_y) <= tol
            and abs(a.pixel_width - b.pixel_width) <= tol
            and abs(a.pixel_height - b.pixel_height) <= tol
        )

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates of every pixel center as (x, y) meshgrids."""
        cols = np.arange(self.width)
        rows = np.arange(self.height)
        x = self.transform.origin_x + (cols + 0.5) * self.transform.pixel_width
        y = self.transform.origin_y - (rows + 0.5) * self.transform.pixel_height
        return np.meshgrid(x, y)
