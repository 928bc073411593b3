"""Exception hierarchy shared by all pipeline stages.

Every data-dependent failure raises a :class:`DataError` subclass so the CLI
can map them uniformly to exit code 2 while usage errors stay on exit code 1.
"""


class DataError(Exception):
    """Invalid or inconsistent input data."""


class GeoTiffError(DataError):
    """Unreadable or unsupported TIFF file."""


class BoundaryError(DataError):
    """Malformed boundary GeoJSON."""


class BandError(DataError):
    """Missing or misaligned spectral band."""


class ClusterError(DataError):
    """Clustering preconditions violated."""


class SoundingError(DataError):
    """Malformed sounding or velocity-profile file."""


class MissionError(DataError):
    """Survey-plan or harvest-report preconditions violated."""
