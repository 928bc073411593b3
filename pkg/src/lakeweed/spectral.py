"""Satellite band ingestion, vegetation index and water mask.

The vegetation signal is the normalized difference of the red-edge and red
reflectance bands; it rises with the density of submerged or floating
plants.  The raw index lives in [-1, 1] and is additionally published as a
0-255 byte layer (linear scaling, rounding half away from zero).  Water is
classified with the standard green/NIR normalized difference (NDWI > 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BandError, DataError
from .geo import GeoRaster
from .geotiff import read_geotiff

BAND_RED = "B04"
BAND_RED_EDGE = "B05"
BAND_GREEN = "B03"
BAND_NIR = "B08"

DEFAULT_BAND_IDS = {
    "red": BAND_RED,
    "red_edge": BAND_RED_EDGE,
    "green": BAND_GREEN,
    "nir": BAND_NIR,
}


class DirectoryBandProvider:
    """Resolves band ids to GeoTIFF files named ``<band_id>.tif`` in a directory."""

    def __init__(self, directory) -> None:
        self.directory = Path(directory)

    def load(self, band_id: str) -> GeoRaster:
        path = self.directory / f"{band_id}.tif"
        if not path.is_file():
            raise BandError(f"band not found: {band_id} (expected {path})")
        return read_geotiff(path)


@dataclass(frozen=True)
class BandSet:
    """Four aligned float32 reflectance rasters in [0, 1]."""

    red: GeoRaster
    red_edge: GeoRaster
    green: GeoRaster
    nir: GeoRaster

    def __post_init__(self) -> None:
        rasters = self.as_dict()
        ref_name, ref = next(iter(rasters.items()))
        for name, raster in rasters.items():
            if not raster.is_float:
                raise BandError(f"band {name} must be float32 reflectance")
            if not raster.same_grid(ref):
                raise BandError(
                    f"band grid mismatch: {name} is "
                    f"{raster.width}x{raster.height} @ {raster.transform}, "
                    f"{ref_name} is {ref.width}x{ref.height} @ {ref.transform}"
                )
            valid = raster.samples[raster.valid_mask()]
            if valid.size and (valid.min() < 0.0 or valid.max() > 1.0):
                raise BandError(f"band {name} reflectance outside [0, 1]")

    def as_dict(self) -> dict[str, GeoRaster]:
        return {
            "red": self.red,
            "red_edge": self.red_edge,
            "green": self.green,
            "nir": self.nir,
        }

    @property
    def grid(self) -> GeoRaster:
        return self.red


def load_bands(provider, band_ids: dict[str, str] | None = None) -> BandSet:
    """Load the four reflectance bands through a provider.

    ``provider`` needs a ``load(band_id) -> GeoRaster`` method; see
    :class:`DirectoryBandProvider`.  ``band_ids`` maps the roles red,
    red_edge, green, nir to provider ids (Sentinel-2 names by default).
    """
    ids = dict(DEFAULT_BAND_IDS)
    if band_ids:
        ids.update(band_ids)
    rasters = {role: provider.load(band_id) for role, band_id in ids.items()}
    return BandSet(**rasters)


@dataclass(frozen=True)
class SavIndexRaster:
    """Vegetation index as a raw [-1, 1] float layer plus a 0-255 byte layer.

    The raw layer is the authoritative validity mask: a fully saturated
    negative pixel (raw == -1) scales to byte value 0, which coincides with
    the byte nodata sentinel, so consumers needing exact validity must look
    at ``raw``.
    """

    raw: GeoRaster
    scaled: GeoRaster

    def valid_mask(self) -> np.ndarray:
        return self.raw.valid_mask()


def _scale_to_byte(raw: np.ndarray, valid: np.ndarray) -> np.ndarray:
    # round half away from zero; arguments are >= 0 so floor(x + 0.5) does it
    scaled = np.zeros(raw.shape, dtype=np.uint8)
    values = 255.0 * (raw[valid] + 1.0) / 2.0
    scaled[valid] = np.floor(values + 0.5).astype(np.uint8)
    return scaled


def _normalized_difference(a: GeoRaster, b: GeoRaster) -> tuple[np.ndarray, np.ndarray]:
    """(a - b) / (a + b) with validity mask; zero denominators go invalid."""
    valid = a.valid_mask() & b.valid_mask()
    av = a.samples.astype(np.float64)
    bv = b.samples.astype(np.float64)
    den = av + bv
    valid &= den != 0.0
    out = np.full(a.samples.shape, np.nan, dtype=np.float64)
    out[valid] = (av[valid] - bv[valid]) / den[valid]
    return out, valid


def sav_index(bands: BandSet) -> SavIndexRaster:
    """Per-pixel (red_edge - red) / (red_edge + red), raw and byte-scaled."""
    raw, valid = _normalized_difference(bands.red_edge, bands.red)
    grid = bands.grid
    raw_raster = GeoRaster(
        samples=raw.astype(np.float32),
        transform=grid.transform,
        crs=grid.crs,
    )
    scaled_raster = GeoRaster(
        samples=_scale_to_byte(raw, valid),
        transform=grid.transform,
        crs=grid.crs,
        nodata=0.0,
    )
    return SavIndexRaster(raw=raw_raster, scaled=scaled_raster)


def water_mask(bands: BandSet, threshold: float = 0.0) -> GeoRaster:
    """Byte mask: 1 where NDWI = (green - nir)/(green + nir) exceeds threshold."""
    ndwi, valid = _normalized_difference(bands.green, bands.nir)
    mask = np.zeros(ndwi.shape, dtype=np.uint8)
    mask[valid & (ndwi > threshold)] = 1
    grid = bands.grid
    return GeoRaster(samples=mask, transform=grid.transform, crs=grid.crs, nodata=0.0)


def apply_masks(index: SavIndexRaster, water: GeoRaster, lake: GeoRaster) -> SavIndexRaster:
    """Restrict the index to pixels where both masks are 1.

    Masked pixels become nodata in both layers; everything else is copied
    bit-for-bit, which makes the operation idempotent.
    """
    for name, mask in (("water", water), ("lake", lake)):
        if mask.is_float:
            raise DataError(f"{name} mask must be a byte raster")
        if not mask.same_grid(index.raw):
            raise DataError(
                f"{name} mask grid mismatch: mask is {mask.samples.shape}, "
                f"index is {index.raw.samples.shape}"
            )
    keep = (water.samples == 1) & (lake.samples == 1)
    raw = index.raw.samples.copy()
    raw[~keep] = np.nan
    scaled = index.scaled.samples.copy()
    scaled[~keep] = 0
    grid = index.raw
    return SavIndexRaster(
        raw=GeoRaster(samples=raw, transform=grid.transform, crs=grid.crs),
        scaled=GeoRaster(
            samples=scaled, transform=grid.transform, crs=grid.crs, nodata=0.0
        ),
    )
