"""Projection geometry: pixel/angle/meter conversions and their invariants."""
import math

import numpy as np
import pytest

from panolayout.layout import BoundaryPrediction, CameraModel
from panolayout.projection import (
    column_azimuths,
    floor_boundary_to_polygon,
    floor_point,
    floor_row_for_range,
    pixel_to_spherical,
    proj_floor_depth,
    spherical_to_pixel,
    uncertainty_from_rows,
    uncertainty_score,
)
from panolayout.synthetic import square_room_ranges

CAM = CameraModel(1024, 512, 1.6)


class TestPixelSpherical:
    def test_center_pixel_is_forward_horizon(self):
        c = pixel_to_spherical(CAM, CAM.image_width / 2 - 0.5, CAM.image_height / 2 - 0.5)
        assert c.u == pytest.approx(0.0, abs=1e-12)
        assert c.v == pytest.approx(0.0, abs=1e-12)

    def test_three_quarter_row_is_pi_over_4(self):
        c = pixel_to_spherical(CAM, 0.0, 3 * CAM.image_height / 4 - 0.5)
        assert c.v == pytest.approx(math.pi / 4, abs=1e-12)

    def test_out_of_range_column(self):
        with pytest.raises(ValueError, match="column"):
            pixel_to_spherical(CAM, -1.0, 10.0)

    def test_roundtrip_random_pixels(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            col = float(rng.uniform(0, CAM.image_width))
            row = float(rng.uniform(0, CAM.image_height))
            col = min(col, CAM.image_width - 1e-9)
            row = min(row, CAM.image_height - 1e-9)
            c2, r2 = spherical_to_pixel(CAM, pixel_to_spherical(CAM, col, row))
            assert abs(c2 - col) < 1e-9
            assert abs(r2 - row) < 1e-9


class TestProjFloorDepth:
    def test_tan_pi_over_4(self):
        rho = proj_floor_depth(CAM, 3 * CAM.image_height / 4 - 0.5)
        assert abs(rho - 1.6) < 1e-12

    def test_horizon_is_domain_error(self):
        with pytest.raises(ValueError, match="horizon"):
            proj_floor_depth(CAM, CAM.image_height / 2 - 0.5)

    def test_ten_meter_roundtrip(self):
        # derived by inverting rho = h / tan(v) numerically
        row = floor_row_for_range(CAM, 10.0)
        assert proj_floor_depth(CAM, row) == pytest.approx(10.0, abs=1e-9)

    def test_strictly_decreasing_in_row(self):
        rows = np.linspace(CAM.horizon_row + 1e-6, CAM.image_height - 1e-6, 10_000)
        rho = proj_floor_depth(CAM, rows)
        assert np.all(np.diff(rho) < 0)

    def test_fixed_pixel_shift_amplifies_with_range(self):
        # |Proj(row + delta) - Proj(row)| strictly increases as Proj(row) does
        rows = np.linspace(CAM.horizon_row + 2.0, CAM.image_height - 10.0, 500)
        delta = 3.0
        gap = np.abs(proj_floor_depth(CAM, rows + delta) - proj_floor_depth(CAM, rows))
        rho = proj_floor_depth(CAM, rows)
        order = np.argsort(rho)
        assert np.all(np.diff(gap[order]) > 0)


class TestFloorPoint:
    def test_radial_vs_horizontal(self):
        p = floor_point(CAM, 100.0, 400.0)
        assert p.d >= p.rho
        assert p.rho == pytest.approx(math.hypot(p.x, p.z), abs=1e-12)


class TestBoundaryPolygon:
    def test_constant_rho_gives_equidistant_vertices(self):
        rows = np.full(CAM.image_width, floor_row_for_range(CAM, 3.0))
        poly = floor_boundary_to_polygon(CAM, rows)
        r = np.hypot(poly.vertices[:, 0], poly.vertices[:, 1])
        assert np.all(np.abs(r - 3.0) < 1e-9)

    def test_w4_unit_circle_square_area(self):
        cam = CameraModel(4, 2, 1.6)
        rows = np.full(4, floor_row_for_range(cam, 1.0))
        poly = floor_boundary_to_polygon(cam, rows)
        assert poly.area() == pytest.approx(2.0, abs=1e-12)

    def test_square_room_area_converges(self):
        # oracle: analytic boundary of a 2a x 2a room seen from its center
        a = 2.0
        u = column_azimuths(CAM)
        rows = floor_row_for_range(CAM, square_room_ranges(a, u))
        area = floor_boundary_to_polygon(CAM, rows).area()
        assert abs(area - 4 * a * a) / (4 * a * a) < 1e-3

    def test_row_at_horizon_rejected(self):
        rows = np.full(CAM.image_width, CAM.horizon_row)
        with pytest.raises(ValueError, match="horizon"):
            floor_boundary_to_polygon(CAM, rows)


class TestUncertaintyScore:
    def test_zero_sigma_gives_zero_score(self):
        mu = np.full(CAM.image_width, 400.0)
        assert np.all(uncertainty_from_rows(CAM, mu, np.zeros_like(mu)) == 0.0)

    def test_closed_form_pi4_pi3(self):
        # mu at v=pi/4, mu+sigma at v=pi/3: U = 1.6 - 1.6/tan(pi/3)
        h = CAM.image_height
        mu_row = 3 * h / 4 - 0.5
        up_row = (1 / 3 + 0.5) * h - 0.5  # v = pi/3
        mu = np.full(CAM.image_width, mu_row)
        sigma = np.full(CAM.image_width, up_row - mu_row)
        u = uncertainty_score(CAM, BoundaryPrediction(mu, sigma))
        assert np.all(np.abs(u - 0.6762395692965988) < 1e-9)

    def test_same_pixel_sigma_scores_higher_at_range(self):
        sigma = 2.0
        near = floor_row_for_range(CAM, 2.0)
        far = floor_row_for_range(CAM, 8.0)
        mu = np.array([near, far])
        u = uncertainty_from_rows(CAM, mu, np.full(2, sigma))
        assert u[1] > u[0]

    def test_horizon_violation_reports_column(self):
        mu = np.full(CAM.image_width, 300.0)
        mu[7] = 100.0  # above horizon
        with pytest.raises(ValueError, match="index 7"):
            uncertainty_from_rows(CAM, mu, np.ones_like(mu))

    def test_score_nonnegative_random(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            mu = rng.uniform(CAM.horizon_row + 1, CAM.image_height - 5, CAM.image_width)
            sigma = rng.uniform(0.1, 3.0, CAM.image_width)
            assert np.all(uncertainty_from_rows(CAM, mu, sigma) >= 0.0)
