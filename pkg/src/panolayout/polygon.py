"""Top-down floor polygons: shoelace area and even-odd rasterization.

Boundary polygons projected from noisy per-column predictions are large
(one vertex per panorama column) and may self-intersect, so area and IoU
computations rasterize with the even-odd fill rule; the shoelace formula is
used where the loop is known to be simple.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TopDownPolygon:
    """Ordered (x, z) vertex loop in meters; the closing edge is implicit."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise ValueError(f"vertices must have shape (N, 2), got {verts.shape}")
        if verts.shape[0] < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {verts.shape[0]}")
        if not np.all(np.isfinite(verts)):
            raise ValueError("polygon vertices must be finite")
        verts.flags.writeable = False
        object.__setattr__(self, "vertices", verts)

    def signed_area(self) -> float:
        x, z = self.vertices[:, 0], self.vertices[:, 1]
        x2, z2 = np.roll(x, -1), np.roll(z, -1)
        return 0.5 * float(np.sum(x * z2 - x2 * z))

    def area(self) -> float:
        """Absolute shoelace area; exact only for non-self-intersecting loops."""
        return abs(self.signed_area())

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, zmin, xmax, zmax)."""
        verts = self.vertices
        return (float(verts[:, 0].min()), float(verts[:, 1].min()),
                float(verts[:, 0].max()), float(verts[:, 1].max()))


def rasterize(poly: TopDownPolygon, cell: float,
              origin: tuple[float, float], shape: tuple[int, int]) -> np.ndarray:
    """Even-odd fill of the polygon on a grid of square cells.

    A cell is set when its center is inside the polygon under the even-odd
    rule. ``origin`` is the (x, z) corner of cell (0, 0); the returned mask
    has ``shape`` = (rows along z, cols along x).
    """
    if cell <= 0:
        raise ValueError(f"cell size must be > 0, got {cell}")
    x0, z0 = origin
    nrows, ncols = shape
    mask = np.zeros((nrows, ncols), dtype=bool)

    x1 = poly.vertices[:, 0]
    z1 = poly.vertices[:, 1]
    x2 = np.roll(x1, -1)
    z2 = np.roll(z1, -1)
    keep = z1 != z2  # horizontal edges never cross a scanline
    x1, z1, x2, z2 = x1[keep], z1[keep], x2[keep], z2[keep]
    if x1.size == 0:
        return mask
    slope = (x2 - x1) / (z2 - z1)

    for r in range(nrows):
        zc = z0 + (r + 0.5) * cell
        crossing = (z1 <= zc) != (z2 <= zc)  # half-open: vertices count once
        if not crossing.any():
            continue
        xs = np.sort(x1[crossing] + (zc - z1[crossing]) * slope[crossing])
        row = mask[r]
        for a, b in zip(xs[0::2], xs[1::2]):
            lo = max(0, math.ceil((a - x0) / cell - 0.5))
            hi = min(ncols, math.ceil((b - x0) / cell - 0.5))
            if hi > lo:
                row[lo:hi] = True
    return mask


def shared_grid(a: TopDownPolygon, b: TopDownPolygon,
                cell: float) -> tuple[tuple[float, float], tuple[int, int]]:
    """Grid origin and shape covering the joint bounding box, one cell padded."""
    ax0, az0, ax1, az1 = a.bounds()
    bx0, bz0, bx1, bz1 = b.bounds()
    x0, z0 = min(ax0, bx0) - cell, min(az0, bz0) - cell
    x1, z1 = max(ax1, bx1) + cell, max(az1, bz1) + cell
    shape = (max(1, math.ceil((z1 - z0) / cell)), max(1, math.ceil((x1 - x0) / cell)))
    return (x0, z0), shape


def raster_area(poly: TopDownPolygon, cell: float = 0.01) -> float:
    """Even-odd filled area in square meters."""
    origin, shape = shared_grid(poly, poly, cell)
    return float(rasterize(poly, cell, origin, shape).sum()) * cell * cell


def robust_area(poly: TopDownPolygon, cell: float = 0.01) -> float:
    """Shoelace area, falling back to raster area when the loop self-intersects.

    The two estimates disagreeing by more than 1% is taken as evidence of
    self-intersection, where the shoelace sum is meaningless.
    """
    shoelace = poly.area()
    raster = raster_area(poly, cell)
    if shoelace == 0.0 or abs(shoelace - raster) / max(shoelace, raster) > 0.01:
        return raster
    return shoelace
