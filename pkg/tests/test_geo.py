import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakeweed.errors import DataError
from lakeweed.geo import (
    CRS_LOCAL,
    CRS_WGS84,
    AffineTransform,
    GeoRaster,
    LocalProjection,
    pixel_to_world,
    world_to_pixel,
)


class TestAffineTransform:
    def test_origin_pixel_center(self):
        t = AffineTransform(0, 0, 1, 1)
        assert t.pixel_to_world(0, 0) == (0.5, -0.5)

    def test_direct_arithmetic(self):
        t = AffineTransform(10, 20, 2, 2)
        assert t.pixel_to_world(3, 1) == (17.0, 17.0)

    def test_round_trip_100_random_pixels(self, rng):
        t = AffineTransform(9.7, 52.4, 0.0001, 0.00015)
        cols = rng.integers(0, 5000, 100)
        rows = rng.integers(0, 5000, 100)
        for c, r in zip(cols, rows):
            x, y = t.pixel_to_world(int(c), int(r))
            c2, r2 = t.world_to_pixel(x, y)
            assert abs(c2 - c) < 1e-9
            assert abs(r2 - r) < 1e-9

    def test_module_level_aliases(self):
        t = AffineTransform(10, 20, 2, 2)
        assert pixel_to_world(t, 3, 1) == (17.0, 17.0)
        assert world_to_pixel(t, 17.0, 17.0) == (3.0, 1.0)

    def test_world_to_cell_floor(self):
        t = AffineTransform(0, 10, 1, 1)
        assert t.world_to_cell(0.99, 9.01) == (0, 0)
        assert t.world_to_cell(1.0, 9.0) == (1, 1)

    @pytest.mark.parametrize("pw,ph", [(0, 1), (1, 0), (-1, 1), (1, -2)])
    def test_rejects_non_positive_pixel_size(self, pw, ph):
        with pytest.raises(DataError):
            AffineTransform(0, 0, pw, ph)

    @given(
        col=st.integers(0, 10_000),
        row=st.integers(0, 10_000),
        pw=st.floats(1e-6, 10.0, allow_nan=False),
        ph=st.floats(1e-6, 10.0, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, col, row, pw, ph):
        t = AffineTransform(-50.0, 60.0, pw, ph)
        x, y = t.pixel_to_world(col, row)
        c2, r2 = t.world_to_pixel(x, y)
        assert abs(c2 - col) < 1e-6
        assert abs(r2 - row) < 1e-6


class TestLocalProjection:
    def test_reference_maps_to_origin(self):
        p = LocalProjection(9.74, 52.35)
        assert p.forward(9.74, 52.35) == (0.0, 0.0)

    def test_known_offset(self):
        # frozen from an independent high-precision evaluation of
        # R * radians(dlon) * cos(radians(lat0)) and R * radians(dlat)
        # with R = 6378137, dlon = 0.0075 deg, dlat = -0.004 deg
        p = LocalProjection(9.74, 52.35)
        x, y = p.forward(9.7475, 52.346)
        assert x == pytest.approx(509.98492297014, abs=1e-6)
        assert y == pytest.approx(-445.27796317363, abs=1e-6)

    def test_round_trip_100_random_points(self, rng):
        p = LocalProjection(9.74, 52.35)
        lons = 9.74 + rng.uniform(-0.02, 0.02, 100)
        lats = 52.35 + rng.uniform(-0.01, 0.01, 100)
        lon2, lat2 = p.inverse(*p.forward(lons, lats))
        np.testing.assert_allclose(lon2, lons, rtol=0, atol=1e-9)
        np.testing.assert_allclose(lat2, lats, rtol=0, atol=1e-9)

    def test_forward_inverse_identity_within_micrometers(self):
        p = LocalProjection(9.74, 52.35)
        x, y = p.forward(9.7512, 52.3448)
        x2, y2 = p.forward(*p.inverse(x, y))
        assert abs(x2 - x) < 1e-6
        assert abs(y2 - y) < 1e-6

    def test_rejects_non_finite(self):
        p = LocalProjection(9.74, 52.35)
        with pytest.raises(DataError):
            p.forward(float("nan"), 52.0)

    def test_rejects_polar_reference(self):
        with pytest.raises(DataError):
            LocalProjection(0.0, 89.5)

    def test_meters_per_degree(self):
        p = LocalProjection(0.0, 0.0)
        mx, my = p.meters_per_degree()
        assert mx == pytest.approx(my)
        assert my == pytest.approx(6378137.0 * math.pi / 180.0)


class TestGeoRaster:
    def test_float64_is_narrowed_to_float32(self):
        r = GeoRaster(
            samples=np.zeros((2, 3), dtype=np.float64),
            transform=AffineTransform(0, 2, 1, 1),
            crs=CRS_WGS84,
        )
        assert r.samples.dtype == np.float32
        assert (r.width, r.height) == (3, 2)

    def test_rejects_unsupported_dtype(self):
        with pytest.raises(DataError):
            GeoRaster(
                samples=np.zeros((2, 2), dtype=np.int32),
                transform=AffineTransform(0, 2, 1, 1),
                crs=CRS_WGS84,
            )

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            GeoRaster(
                samples=np.zeros((0, 3), dtype=np.float32),
                transform=AffineTransform(0, 0, 1, 1),
                crs=CRS_WGS84,
            )

    def test_rejects_bad_crs(self):
        with pytest.raises(DataError):
            GeoRaster(
                samples=np.zeros((1, 1), dtype=np.float32),
                transform=AffineTransform(0, 1, 1, 1),
                crs="EPSG:3857",
            )

    def test_rejects_inf_samples(self):
        with pytest.raises(DataError):
            GeoRaster(
                samples=np.array([[np.inf]], dtype=np.float32),
                transform=AffineTransform(0, 1, 1, 1),
                crs=CRS_WGS84,
            )

    def test_nan_is_fine_as_nodata(self):
        r = GeoRaster(
            samples=np.array([[np.nan, 1.0]], dtype=np.float32),
            transform=AffineTransform(0, 1, 1, 1),
            crs=CRS_WGS84,
        )
        assert r.valid_mask().tolist() == [[False, True]]

    def test_byte_raster_nodata_zero(self):
        r = GeoRaster(
            samples=np.array([[0, 7]], dtype=np.uint8),
            transform=AffineTransform(0, 1, 1, 1),
            crs=CRS_LOCAL,
        )
        assert r.nodata == 0.0
        assert r.valid_mask().tolist() == [[False, True]]

    def test_byte_raster_rejects_fractional_nodata(self):
        with pytest.raises(DataError):
            GeoRaster(
                samples=np.array([[1]], dtype=np.uint8),
                transform=AffineTransform(0, 1, 1, 1),
                crs=CRS_WGS84,
                nodata=0.5,
            )

    def test_non_nan_float_nodata_mask(self):
        r = GeoRaster(
            samples=np.array([[-9999.0, 2.5]], dtype=np.float32),
            transform=AffineTransform(0, 1, 1, 1),
            crs=CRS_LOCAL,
            nodata=-9999.0,
        )
        assert r.valid_mask().tolist() == [[False, True]]

    def test_same_grid(self, wgs_transform):
        a = GeoRaster(np.zeros((2, 2), np.float32), wgs_transform, CRS_WGS84)
        b = GeoRaster(np.ones((2, 2), np.float32), wgs_transform, CRS_WGS84)
        c = GeoRaster(np.ones((2, 3), np.float32), wgs_transform, CRS_WGS84)
        assert a.same_grid(b)
        assert not a.same_grid(c)

    def test_pixel_centers_match_transform(self, wgs_transform):
        r = GeoRaster(np.zeros((2, 3), np.float32), wgs_transform, CRS_WGS84)
        xs, ys = r.pixel_centers()
        assert xs.shape == (2, 3)
        assert xs[0, 0] == wgs_transform.pixel_to_world(0, 0)[0]
        assert ys[1, 2] == wgs_transform.pixel_to_world(2, 1)[1]
