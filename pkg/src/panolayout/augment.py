"""Layout and raster augmentation: pano-stretch, flip, rotation, luminance.

Pano-stretch scales the top-down scene by (kx, kz) on the x and z axes only
(heights are untouched) and re-renders: a floor point at azimuth u and range
rho moves to azimuth atan2(kz*sin(u)*rho, kx*cos(u)*rho) and range
rho * hypot(kx*cos(u), kz*sin(u)). Boundary rows are re-sampled back onto
the uniform column grid by monotone piecewise-linear interpolation in
azimuth with wraparound; images are inverse-mapped and sampled bilinearly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .layout import CameraModel, Corner, Layout, validate_layout
from .projection import TWO_PI, column_azimuths, latitude_of_row, row_of_latitude
from .validation import check_scalar

REFINE_STRETCH_RANGE = (1.0, 2.5)
INITIAL_STRETCH_RANGE = (1.0 / 2.5, 2.5)


@dataclass(frozen=True)
class StretchParams:
    """Stretch factors for the x and z axes, bounded per augmentation mode.

    Refinement mode only ever magnifies (k >= 1), pushing boundaries toward
    the far region; initial mode stretches in both directions.
    """

    kx: float
    kz: float
    mode: str = "refine"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("refine", "initial"):
            raise ValueError(f"mode must be 'refine' or 'initial', got {self.mode!r}")
        lo, hi = REFINE_STRETCH_RANGE if self.mode == "refine" else INITIAL_STRETCH_RANGE
        for name, k in (("kx", self.kx), ("kz", self.kz)):
            check_scalar(k, name, minimum=lo, maximum=hi)


def sample_stretch_params(mode: str, rng: np.random.Generator,
                          seed: int = 0) -> StretchParams:
    """Draw (kx, kz) uniformly from the mode's range."""
    lo, hi = REFINE_STRETCH_RANGE if mode == "refine" else INITIAL_STRETCH_RANGE
    if mode not in ("refine", "initial"):
        raise ValueError(f"mode must be 'refine' or 'initial', got {mode!r}")
    return StretchParams(kx=float(rng.uniform(lo, hi)), kz=float(rng.uniform(lo, hi)),
                         mode=mode, seed=seed)


def _stretched_azimuth(u: np.ndarray, kx: float, kz: float) -> np.ndarray:
    return np.arctan2(kz * np.sin(u), kx * np.cos(u))


def stretch_layout(camera: CameraModel, layout: Layout, p: StretchParams) -> Layout:
    """Apply the top-down (kx, kz) scaling to a layout and re-sample it."""
    validate_layout(camera, layout)
    h_cam = camera.camera_height
    u = column_azimuths(camera)

    v_floor = np.asarray(latitude_of_row(camera, layout.floor_rows))
    rho = h_cam / np.tan(v_floor)
    if np.any(rho < 1e-9):
        raise ValueError("degenerate layout: floor boundary collapses onto the camera")
    # same wall point carries the ceiling boundary; its height stays fixed
    v_ceil = np.asarray(latitude_of_row(camera, layout.ceiling_rows))
    ceil_height = rho * np.tan(-v_ceil)

    scale = np.hypot(p.kx * np.cos(u), p.kz * np.sin(u))
    rho2 = rho * scale
    u2 = _stretched_azimuth(u, p.kx, p.kz)
    floor2 = np.asarray(row_of_latitude(camera, np.arctan2(h_cam, rho2)))
    ceil2 = np.asarray(row_of_latitude(camera, -np.arctan2(ceil_height, rho2)))

    floor_rows = np.interp(u, u2, floor2, period=TWO_PI)
    ceil_rows = np.interp(u, u2, ceil2, period=TWO_PI)

    w = camera.image_width
    corners = []
    for c in layout.corners:
        uc = float(_stretched_azimuth(u[c.col : c.col + 1], p.kx, p.kz)[0])
        col2 = int(round((uc + math.pi) * w / TWO_PI - 0.5)) % w
        corners.append(Corner(col2, c.strength))
    return validate_layout(camera, Layout(floor_rows, ceil_rows, tuple(corners)))


def _as_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim not in (2, 3):
        raise ValueError(f"image must be (H, W) or (H, W, C), got shape {image.shape}")
    h, w = image.shape[:2]
    if w != 2 * h:
        raise ValueError(f"equirectangular image requires width = 2 * height, got {w}x{h}")
    return image


def _bilinear_sample(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample at fractional pixel centers: columns wrap, rows clamp."""
    h, w = image.shape[:2]
    data = image.astype(np.float64)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    fr = rows - r0
    fc = cols - c0
    r1 = np.clip(r0 + 1, 0, h - 1)
    r0 = np.clip(r0, 0, h - 1)
    c1 = (c0 + 1) % w
    c0 = c0 % w
    if image.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    top = data[r0, c0] * (1 - fc) + data[r0, c1] * fc
    bottom = data[r1, c0] * (1 - fc) + data[r1, c1] * fc
    out = top * (1 - fr) + bottom * fr
    if np.issubdtype(image.dtype, np.integer):
        return np.clip(np.rint(out), 0, 255).astype(image.dtype)
    return out.astype(image.dtype)


def stretch_image(image: np.ndarray, p: StretchParams) -> np.ndarray:
    """Inverse-mapped pano-stretch of an equirectangular raster."""
    image = _as_image(image)
    h, w = image.shape[:2]
    u_out = TWO_PI * (np.arange(w) + 0.5) / w - math.pi
    v_out = np.pi * ((np.arange(h) + 0.5) / h - 0.5)

    # ray of the output pixel, pulled back through the inverse scene scaling
    u_src = np.arctan2(np.sin(u_out) / p.kz, np.cos(u_out) / p.kx)
    scale = np.hypot(np.cos(u_out) / p.kx, np.sin(u_out) / p.kz)
    v_src = np.arctan(np.tan(v_out)[:, None] / scale[None, :])

    cols = (u_src + math.pi) * w / TWO_PI - 0.5
    rows = (v_src / math.pi + 0.5) * h - 0.5
    return _bilinear_sample(image, rows, np.broadcast_to(cols, rows.shape))


def flip_lr(obj):
    """Mirror columns of a layout or an image."""
    if isinstance(obj, Layout):
        w = obj.width
        corners = tuple(Corner(w - 1 - c.col, c.strength) for c in reversed(obj.corners))
        return Layout(obj.floor_rows[::-1], obj.ceiling_rows[::-1], corners)
    return _as_image(obj)[:, ::-1].copy()


def rotate_horizontal(obj, columns: int):
    """Circular column shift (panorama yaw rotation)."""
    columns = int(columns)
    if isinstance(obj, Layout):
        w = obj.width
        corners = tuple(Corner((c.col + columns) % w, c.strength) for c in obj.corners)
        return Layout(np.roll(obj.floor_rows, columns),
                      np.roll(obj.ceiling_rows, columns), corners)
    return np.roll(_as_image(obj), columns, axis=1)


def luminance(image: np.ndarray, gamma: float) -> np.ndarray:
    """Apply value^gamma on intensities normalized to [0, 1]."""
    gamma = check_scalar(gamma, "gamma", minimum=0.5, maximum=2.0)
    image = _as_image(image)
    if np.issubdtype(image.dtype, np.integer):
        out = np.power(image.astype(np.float64) / 255.0, gamma) * 255.0
        return np.clip(np.rint(out), 0, 255).astype(image.dtype)
    return np.power(image.astype(np.float64), gamma).astype(image.dtype)


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG as an array."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img)


def save_image(path, image: np.ndarray) -> None:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")
