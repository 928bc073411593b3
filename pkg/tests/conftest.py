import numpy as np
import pytest

from lakeweed.geo import CRS_WGS84, AffineTransform, GeoRaster
from lakeweed.synthlab import Patch, Scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20240806)


@pytest.fixture
def wgs_transform():
    return AffineTransform(9.70, 52.37, 0.0001, 0.0001)


def make_float_raster(values, transform=None, crs=CRS_WGS84, nodata=float("nan")):
    arr = np.asarray(values, dtype=np.float32)
    return GeoRaster(
        samples=arr,
        transform=transform or AffineTransform(0.0, float(arr.shape[0]), 1.0, 1.0),
        crs=crs,
        nodata=nodata,
    )


def make_byte_raster(values, transform=None, crs=CRS_WGS84):
    arr = np.asarray(values, dtype=np.uint8)
    return GeoRaster(
        samples=arr,
        transform=transform or AffineTransform(0.0, float(arr.shape[0]), 1.0, 1.0),
        crs=crs,
        nodata=0.0,
    )


def three_patch_scenario(seed=42, noise_sigma_m=0.0):
    """Lake with one medium and two high patches, well clear of each other."""
    return Scenario(
        seed=seed,
        lake_center_lonlat=(9.74, 52.35),
        lake_semi_axes_m=(750.0, 500.0),
        bed_depth_m=3.0,
        patches=(
            Patch((9.7445, 52.3525), 60.0, 1.3, "high"),
            Patch((9.7365, 52.3475), 50.0, 1.0, "medium"),
            Patch((9.7425, 52.3465), 40.0, 1.3, "high"),
        ),
        shore_ring_width_m=25.0,
        noise_sigma_m=noise_sigma_m,
    )
