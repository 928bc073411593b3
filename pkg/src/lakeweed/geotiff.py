"""Minimal GeoTIFF codec for single-band float32/uint8 rasters.

Writer emits a fixed byte layout so files are reproducible bit-for-bit:

* bytes 0..7: little-endian header ``II*\\0`` + IFD offset (always 8);
* one IFD: entry count, 12-byte entries in ascending tag order, zero next-IFD
  pointer;
* out-of-line tag payloads, again in ascending tag order: ModelPixelScale
  (3 doubles), ModelTiepoint (6 doubles), GeoKeyDirectory (12 shorts), and,
  only when nodata is not NaN *and* its ASCII form exceeds 4 bytes, the GDAL
  nodata string padded to even length (shorter strings live inline in the
  tag entry, as baseline TIFF requires);
* a single strip of sample data.

Tags written: ImageWidth(256), ImageLength(257), BitsPerSample(258),
Compression(259)=1, PhotometricInterpretation(262)=1, StripOffsets(273),
SamplesPerPixel(277)=1, RowsPerStrip(278)=ImageLength, StripByteCounts(279),
SampleFormat(339), ModelPixelScaleTag(33550), ModelTiepointTag(33922),
GeoKeyDirectoryTag(34735), GDAL_NODATA(42113, conditional).

The reader accepts any little-endian, uncompressed, single-band, striped
baseline TIFF carrying those geo tags (multiple strips included); everything
else is rejected with a diagnostic naming the offending tag.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import GeoTiffError
from .geo import CRS_LOCAL, CRS_WGS84, AffineTransform, GeoRaster

# TIFF value types
_TYPE_BYTE = 1
_TYPE_ASCII = 2
_TYPE_SHORT = 3
_TYPE_LONG = 4
_TYPE_RATIONAL = 5
_TYPE_DOUBLE = 12

_TYPE_SIZES = {
    _TYPE_BYTE: 1,
    _TYPE_ASCII: 1,
    _TYPE_SHORT: 2,
    _TYPE_LONG: 4,
    _TYPE_RATIONAL: 8,
    _TYPE_DOUBLE: 8,
}

TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_SAMPLE_FORMAT = 339
TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GDAL_NODATA = 42113

_GEOKEY_MODEL_TYPE = 1024
_GEOKEY_GEOGRAPHIC_TYPE = 2048
_GEOKEY_PROJECTED_CS_TYPE = 3072
_MODEL_TYPE_PROJECTED = 1
_MODEL_TYPE_GEOGRAPHIC = 2
_EPSG_WGS84 = 4326
_USER_DEFINED = 32767


def _geokey_directory(crs: str) -> list[int]:
    if crs == CRS_WGS84:
        return [1, 1, 0, 2,
                _GEOKEY_MODEL_TYPE, 0, 1, _MODEL_TYPE_GEOGRAPHIC,
                _GEOKEY_GEOGRAPHIC_TYPE, 0, 1, _EPSG_WGS84]
    return [1, 1, 0, 2,
            _GEOKEY_MODEL_TYPE, 0, 1, _MODEL_TYPE_PROJECTED,
            _GEOKEY_PROJECTED_CS_TYPE, 0, 1, _USER_DEFINED]


def _nodata_text(raster: GeoRaster) -> bytes | None:
    if math.isnan(raster.nodata):
        return None
    if raster.is_float:
        text = repr(float(raster.nodata))
    else:
        text = str(int(raster.nodata))
    return text.encode("ascii") + b"\0"


def write_geotiff(raster: GeoRaster, path) -> None:
    """Serialize ``raster`` to ``path`` in the fixed subset layout above."""
    t = raster.transform
    bits = 32 if raster.is_float else 8
    sample_format = 3 if raster.is_float else 1
    payload = raster.samples.astype(
        np.dtype("<f4") if raster.is_float else np.uint8, copy=False
    ).tobytes()

    aux: list[tuple[int, bytes]] = []  # (tag, raw bytes), ascending tag order
    aux.append((TAG_MODEL_PIXEL_SCALE,
                struct.pack("<3d", t.pixel_width, t.pixel_height, 0.0)))
    aux.append((TAG_MODEL_TIEPOINT,
                struct.pack("<6d", 0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0)))
    geokeys = _geokey_directory(raster.crs)
    aux.append((TAG_GEO_KEY_DIRECTORY, struct.pack(f"<{len(geokeys)}H", *geokeys)))
    nodata_bytes = _nodata_text(raster)
    nodata_inline = nodata_bytes is not None and len(nodata_bytes) <= 4
    if nodata_bytes is not None and not nodata_inline:
        padded = nodata_bytes + (b"\0" if len(nodata_bytes) % 2 else b"")
        aux.append((TAG_GDAL_NODATA, padded))

    n_tags = 13 + (1 if nodata_bytes is not None else 0)
    ifd_size = 2 + n_tags * 12 + 4
    aux_offset = 8 + ifd_size
    aux_offsets: dict[int, int] = {}
    pos = aux_offset
    for tag, blob in aux:
        aux_offsets[tag] = pos
        pos += len(blob)
    data_offset = pos

    def entry(tag: int, ttype: int, count: int, value_field: bytes) -> bytes:
        return struct.pack("<HHI", tag, ttype, count) + value_field.ljust(4, b"\0")

    entries = [
        entry(TAG_IMAGE_WIDTH, _TYPE_LONG, 1, struct.pack("<I", raster.width)),
        entry(TAG_IMAGE_LENGTH, _TYPE_LONG, 1, struct.pack("<I", raster.height)),
        entry(TAG_BITS_PER_SAMPLE, _TYPE_SHORT, 1, struct.pack("<H", bits)),
        entry(TAG_COMPRESSION, _TYPE_SHORT, 1, struct.pack("<H", 1)),
        entry(TAG_PHOTOMETRIC, _TYPE_SHORT, 1, struct.pack("<H", 1)),
        entry(TAG_STRIP_OFFSETS, _TYPE_LONG, 1, struct.pack("<I", data_offset)),
        entry(TAG_SAMPLES_PER_PIXEL, _TYPE_SHORT, 1, struct.pack("<H", 1)),
        entry(TAG_ROWS_PER_STRIP, _TYPE_LONG, 1, struct.pack("<I", raster.height)),
        entry(TAG_STRIP_BYTE_COUNTS, _TYPE_LONG, 1, struct.pack("<I", len(payload))),
        entry(TAG_SAMPLE_FORMAT, _TYPE_SHORT, 1, struct.pack("<H", sample_format)),
        entry(TAG_MODEL_PIXEL_SCALE, _TYPE_DOUBLE, 3,
              struct.pack("<I", aux_offsets[TAG_MODEL_PIXEL_SCALE])),
        entry(TAG_MODEL_TIEPOINT, _TYPE_DOUBLE, 6,
              struct.pack("<I", aux_offsets[TAG_MODEL_TIEPOINT])),
        entry(TAG_GEO_KEY_DIRECTORY, _TYPE_SHORT, len(geokeys),
              struct.pack("<I", aux_offsets[TAG_GEO_KEY_DIRECTORY])),
    ]
    if nodata_bytes is not None:
        value_field = (
            nodata_bytes
            if nodata_inline
            else struct.pack("<I", aux_offsets[TAG_GDAL_NODATA])
        )
        entries.append(entry(TAG_GDAL_NODATA, _TYPE_ASCII, len(nodata_bytes), value_field))

    out = bytearray()
    out += b"II" + struct.pack("<HI", 42, 8)
    out += struct.pack("<H", n_tags)
    for e in entries:
        out += e
    out += struct.pack("<I", 0)
    for _, blob in aux:
        out += blob
    out += payload

    Path(path).write_bytes(bytes(out))


# ---------------------------------------------------------------------------
# Reader
# ---------------------------------------------------------------------------


def _decode_values(data: bytes, ttype: int, count: int, value_field: bytes):
    size = _TYPE_SIZES[ttype] * count
    if size <= 4:
        raw = value_field[:size]
    else:
        (offset,) = struct.unpack("<I", value_field)
        if offset + size > len(data):
            raise GeoTiffError("tag value offset runs past end of file")
        raw = data[offset:offset + size]
    if ttype == _TYPE_ASCII:
        return raw
    if ttype == _TYPE_BYTE:
        return list(raw)
    fmt = {_TYPE_SHORT: "H", _TYPE_LONG: "I", _TYPE_DOUBLE: "d",
           _TYPE_RATIONAL: "II"}[ttype]
    n = count * (2 if ttype == _TYPE_RATIONAL else 1)
    return list(struct.unpack(f"<{n}{fmt}", raw))


def _require(tags: dict, tag: int, name: str):
    if tag not in tags:
        raise GeoTiffError(f"missing required tag {name}({tag})")
    return tags[tag]


def read_geotiff(path) -> GeoRaster:
    """Parse a little-endian single-band striped GeoTIFF into a GeoRaster."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise GeoTiffError("file too short to be a TIFF")
    byte_order = data[:2]
    if byte_order == b"MM":
        raise GeoTiffError("big-endian TIFF (byte order 'MM') is not supported")
    if byte_order != b"II":
        raise GeoTiffError(f"not a TIFF: bad byte-order mark {byte_order!r}")
    magic, ifd_offset = struct.unpack_from("<HI", data, 2)
    if magic != 42:
        raise GeoTiffError(f"not a TIFF: magic number {magic} != 42")
    if ifd_offset + 2 > len(data):
        raise GeoTiffError("IFD offset runs past end of file")

    (n_tags,) = struct.unpack_from("<H", data, ifd_offset)
    tags: dict[int, tuple[int, int, bytes]] = {}
    for i in range(n_tags):
        base = ifd_offset + 2 + 12 * i
        if base + 12 > len(data):
            raise GeoTiffError("IFD entry runs past end of file")
        tag, ttype, count = struct.unpack_from("<HHI", data, base)
        tags[tag] = (ttype, count, data[base + 8:base + 12])

    def values(tag: int, name: str):
        ttype, count, field_ = _require(tags, tag, name)
        if ttype not in _TYPE_SIZES:
            raise GeoTiffError(f"tag {name}({tag}) has unsupported type {ttype}")
        return _decode_values(data, ttype, count, field_)

    def scalar(tag: int, name: str) -> int:
        return int(values(tag, name)[0])

    width = scalar(TAG_IMAGE_WIDTH, "ImageWidth")
    height = scalar(TAG_IMAGE_LENGTH, "ImageLength")
    if width <= 0 or height <= 0:
        raise GeoTiffError(f"degenerate image size {width}x{height}")

    compression = scalar(TAG_COMPRESSION, "Compression") if TAG_COMPRESSION in tags else 1
    if compression != 1:
        raise GeoTiffError(
            f"Compression({TAG_COMPRESSION}) = {compression}: only uncompressed data is supported"
        )
    spp = scalar(TAG_SAMPLES_PER_PIXEL, "SamplesPerPixel") if TAG_SAMPLES_PER_PIXEL in tags else 1
    if spp != 1:
        raise GeoTiffError(
            f"SamplesPerPixel({TAG_SAMPLES_PER_PIXEL}) = {spp}: only single-band rasters are supported"
        )

    bits = scalar(TAG_BITS_PER_SAMPLE, "BitsPerSample") if TAG_BITS_PER_SAMPLE in tags else 1
    sample_format = scalar(TAG_SAMPLE_FORMAT, "SampleFormat") if TAG_SAMPLE_FORMAT in tags else 1
    if (bits, sample_format) == (32, 3):
        dtype = np.dtype("<f4")
    elif (bits, sample_format) == (8, 1):
        dtype = np.dtype(np.uint8)
    else:
        raise GeoTiffError(
            f"BitsPerSample({TAG_BITS_PER_SAMPLE})={bits} with "
            f"SampleFormat({TAG_SAMPLE_FORMAT})={sample_format} is not supported"
        )

    offsets = [int(v) for v in values(TAG_STRIP_OFFSETS, "StripOffsets")]
    counts = [int(v) for v in values(TAG_STRIP_BYTE_COUNTS, "StripByteCounts")]
    if len(offsets) != len(counts):
        raise GeoTiffError("StripOffsets and StripByteCounts lengths differ")
    raw = bytearray()
    for off, cnt in zip(offsets, counts):
        if off + cnt > len(data):
            raise GeoTiffError("strip data runs past end of file")
        raw += data[off:off + cnt]
    expected = width * height * dtype.itemsize
    if len(raw) != expected:
        raise GeoTiffError(
            f"strip data holds {len(raw)} bytes, expected {expected} for {width}x{height}"
        )
    samples = np.frombuffer(bytes(raw), dtype=dtype).reshape(height, width)

    scale = values(TAG_MODEL_PIXEL_SCALE, "ModelPixelScaleTag")
    if len(scale) < 2:
        raise GeoTiffError("ModelPixelScaleTag must hold at least 2 doubles")
    tie = values(TAG_MODEL_TIEPOINT, "ModelTiepointTag")
    if len(tie) < 6:
        raise GeoTiffError("ModelTiepointTag must hold at least 6 doubles")
    pw, ph = float(scale[0]), float(scale[1])
    origin_x = float(tie[3]) - float(tie[0]) * pw
    origin_y = float(tie[4]) + float(tie[1]) * ph
    transform = AffineTransform(origin_x, origin_y, pw, ph)

    keys = values(TAG_GEO_KEY_DIRECTORY, "GeoKeyDirectoryTag")
    keymap = {}
    for i in range(4, len(keys) - 3, 4):
        keymap[keys[i]] = keys[i + 3]
    model = keymap.get(_GEOKEY_MODEL_TYPE)
    if model == _MODEL_TYPE_GEOGRAPHIC:
        geographic = keymap.get(_GEOKEY_GEOGRAPHIC_TYPE)
        if geographic != _EPSG_WGS84:
            raise GeoTiffError(
                f"GeoKeyDirectoryTag: geographic CRS {geographic} is not EPSG:{_EPSG_WGS84}"
            )
        crs = CRS_WGS84
    elif model == _MODEL_TYPE_PROJECTED:
        crs = CRS_LOCAL
    else:
        raise GeoTiffError(f"GeoKeyDirectoryTag: unsupported model type {model}")

    if TAG_GDAL_NODATA in tags:
        text = values(TAG_GDAL_NODATA, "GDAL_NODATA").split(b"\0")[0].decode("ascii").strip()
        try:
            nodata = float(text)
        except ValueError as exc:
            raise GeoTiffError(f"GDAL_NODATA value {text!r} is not numeric") from exc
    else:
        nodata = math.nan if dtype.kind == "f" else 0.0

    return GeoRaster(samples=samples, transform=transform, crs=crs, nodata=nodata)
