"""Lake vegetation mapping toolkit.

Satellite reflectance screening finds coarse areas of interest, multibeam
sonar soundings turn them into decimeter-scale vegetation height maps, and
survey plans plus harvest-effect reports close the maintenance loop.
"""

from .errors import (
    BandError,
    BoundaryError,
    ClusterError,
    DataError,
    GeoTiffError,
    MissionError,
    SoundingError,
)
from .geo import (
    CRS_LOCAL,
    CRS_WGS84,
    AffineTransform,
    GeoRaster,
    LocalProjection,
)
from .geotiff import read_geotiff, write_geotiff
from .vector import LakeBoundary, contains, convex_hull, parse_boundary, rasterize_mask

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "BandError",
    "BoundaryError",
    "ClusterError",
    "CRS_LOCAL",
    "CRS_WGS84",
    "DataError",
    "GeoRaster",
    "GeoTiffError",
    "LakeBoundary",
    "LocalProjection",
    "MissionError",
    "SoundingError",
    "contains",
    "convex_hull",
    "parse_boundary",
    "rasterize_mask",
    "read_geotiff",
    "write_geotiff",
    "__version__",
]
