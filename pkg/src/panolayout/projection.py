"""Pixel, angle, and meter conversions for equirectangular panoramas.

Conventions (pixel centers at +0.5):
    u = 2*pi * (col + 0.5) / W - pi        azimuth, [-pi, pi)
    v = pi * ((row + 0.5) / H - 0.5)       latitude, positive below the horizon

so the horizon (v = 0) falls exactly between rows H/2 - 1 and H/2, and a
floor point at latitude v > 0 seen by a camera at height h has horizontal
range rho = h / tan(v). Top-down coordinates are x = rho * cos(u),
z = rho * sin(u).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .layout import BoundaryPrediction, CameraModel
from .polygon import TopDownPolygon
from .validation import as_float_vector

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SphericalCoord:
    """Azimuth u in [-pi, pi) and latitude v in (-pi/2, pi/2)."""

    u: float
    v: float

    def __post_init__(self):
        if not -math.pi <= self.u < math.pi:
            raise ValueError(f"azimuth u must be in [-pi, pi), got {self.u}")
        if not -math.pi / 2 < self.v < math.pi / 2:
            raise ValueError(f"latitude v must be in (-pi/2, pi/2), got {self.v}")


@dataclass(frozen=True)
class TopDownPoint:
    """A floor point in meters: top-down (x, z), horizontal range, radial distance."""

    x: float
    z: float
    rho: float
    d: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if self.d < self.rho - 1e-9:
            raise ValueError(f"radial distance d = {self.d} smaller than rho = {self.rho}")
        if not math.isclose(math.hypot(self.x, self.z), self.rho, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError("rho must equal hypot(x, z)")


def column_azimuths(camera: CameraModel) -> np.ndarray:
    """Azimuth of every column center, ascending in [-pi, pi)."""
    w = camera.image_width
    return TWO_PI * (np.arange(w) + 0.5) / w - math.pi


def latitude_of_row(camera: CameraModel, row) -> np.ndarray | float:
    return np.pi * ((np.asarray(row, dtype=np.float64) + 0.5) / camera.image_height - 0.5)


def row_of_latitude(camera: CameraModel, v) -> np.ndarray | float:
    return (np.asarray(v, dtype=np.float64) / np.pi + 0.5) * camera.image_height - 0.5


def pixel_to_spherical(camera: CameraModel, col: float, row: float) -> SphericalCoord:
    """Map a (sub-)pixel position to spherical coordinates."""
    if not 0 <= col < camera.image_width:
        raise ValueError(f"column {col} outside [0, {camera.image_width})")
    if not 0 <= row < camera.image_height:
        raise ValueError(f"row {row} outside [0, {camera.image_height})")
    u = TWO_PI * (col + 0.5) / camera.image_width - math.pi
    v = float(latitude_of_row(camera, row))
    if u >= math.pi:  # guard the half-open azimuth range against rounding
        u = math.nextafter(math.pi, -math.pi)
    return SphericalCoord(u, v)


def spherical_to_pixel(camera: CameraModel, coord: SphericalCoord) -> tuple[float, float]:
    """Inverse of :func:`pixel_to_spherical`."""
    col = (coord.u + math.pi) * camera.image_width / TWO_PI - 0.5
    row = float(row_of_latitude(camera, coord.v))
    return col, row


def _floor_latitudes(camera: CameraModel, rows, name: str) -> np.ndarray:
    rows = np.atleast_1d(np.asarray(rows, dtype=np.float64))
    v = np.atleast_1d(latitude_of_row(camera, rows))
    bad = np.flatnonzero(~((v > 0) & (rows < camera.image_height)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"{name} at index {i} is {rows[i]}, which does not map strictly "
            f"below the horizon"
        )
    return v


def proj_floor_depth(camera: CameraModel, row):
    """Horizontal range in meters of the floor point seen at a pixel row.

    Accepts a scalar or an array of rows; every row must lie strictly below
    the horizon (v > 0), otherwise a domain error is raised.
    """
    scalar = np.isscalar(row) or np.ndim(row) == 0
    v = _floor_latitudes(camera, np.atleast_1d(np.asarray(row, dtype=np.float64)), "row")
    rho = camera.camera_height / np.tan(v)
    return float(rho[0]) if scalar else rho


def floor_row_for_range(camera: CameraModel, rho):
    """Pixel row at which a floor point at horizontal range rho appears."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0):
        raise ValueError("rho must be strictly positive")
    row = row_of_latitude(camera, np.arctan2(camera.camera_height, rho))
    return float(row) if row.ndim == 0 else row


def floor_point(camera: CameraModel, col: float, row: float) -> TopDownPoint:
    """Project one floor-boundary pixel to top-down meters."""
    coord = pixel_to_spherical(camera, col, row)
    if coord.v <= 0:
        raise ValueError(f"row {row} is at or above the horizon")
    rho = camera.camera_height / math.tan(coord.v)
    d = camera.camera_height / math.sin(coord.v)
    return TopDownPoint(rho * math.cos(coord.u), rho * math.sin(coord.u), rho, d)


def floor_boundary_to_polygon(camera: CameraModel, floor_rows) -> TopDownPolygon:
    """Project a per-column floor boundary to the closed top-down polygon.

    Vertex i is the floor point of column i; the loop wraps from the last
    column back to column 0 (the panorama is periodic).
    """
    rows = as_float_vector(floor_rows, "floor_rows", camera.image_width)
    v = _floor_latitudes(camera, rows, "floor row")
    rho = camera.camera_height / np.tan(v)
    u = column_azimuths(camera)
    return TopDownPolygon(np.column_stack([rho * np.cos(u), rho * np.sin(u)]))


def uncertainty_from_rows(camera: CameraModel, mu, sigma) -> np.ndarray:
    """Depth-space uncertainty from raw mean/sigma row vectors (sigma >= 0)."""
    mu = as_float_vector(mu, "mu")
    sigma = as_float_vector(sigma, "sigma", mu.shape[0])
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    v_mu = _floor_latitudes(camera, mu, "mu")
    v_up = _floor_latitudes(camera, mu + sigma, "mu + sigma")
    return np.abs(camera.camera_height / np.tan(v_up) - camera.camera_height / np.tan(v_mu))


def uncertainty_score(camera: CameraModel, pred: BoundaryPrediction) -> np.ndarray:
    """Depth-space uncertainty per column, in meters.

    The image-space band [mu, mu + sigma] is projected to the floor; the
    score is the absolute range gap |Proj(mu + sigma) - Proj(mu)|. The upper
    bound mu + sigma is the nearer floor point, so the gap grows with range:
    the same pixel sigma means more meters of uncertainty on distant walls.
    """
    if pred.width != camera.image_width:
        raise ValueError(
            f"prediction has {pred.width} columns, camera expects {camera.image_width}"
        )
    return uncertainty_from_rows(camera, pred.mu, pred.sigma)
