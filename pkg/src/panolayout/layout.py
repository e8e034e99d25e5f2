"""Domain types for per-column room layouts and their on-disk JSON format.

A layout stores, for each of the W panorama columns, the pixel row of the
floor-wall boundary and of the ceiling-wall boundary, plus sparse corner
annotations. Row 0 is the top of the image; rows are real-valued (sub-pixel).
The horizon sits at row H/2 - 0.5, so floor rows must be strictly greater
and ceiling rows strictly smaller than that.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import as_float_vector, check_positive, check_same_length, frozen_array


@dataclass(frozen=True)
class CameraModel:
    """Panorama dimensions and camera height above the floor plane."""

    image_width: int
    image_height: int
    camera_height: float = 1.6

    def __post_init__(self):
        w, h = self.image_width, self.image_height
        if w < 2 or h < 2:
            raise ValueError(f"image must be at least 2x2, got {w}x{h}")
        if w != 2 * h:
            raise ValueError(f"full panorama requires width = 2 * height, got {w}x{h}")
        if not (self.camera_height > 0 and math.isfinite(self.camera_height)):
            raise ValueError(f"camera_height must be > 0, got {self.camera_height}")

    @property
    def horizon_row(self) -> float:
        """Continuous row coordinate of the v = 0 horizon."""
        return self.image_height / 2 - 0.5


@dataclass(frozen=True)
class Corner:
    """A wall-wall corner at a column, with continuous strength in [0, 1]."""

    col: int
    strength: float

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"corner strength must be in [0, 1], got {self.strength}")


@dataclass(frozen=True)
class Layout:
    """Per-column boundary rows plus corner annotations.

    Camera-independent invariants (equal lengths, finite values, strength
    range) are enforced on construction; checks that need the camera (length
    W, horizon side, corner column range) live in :func:`validate_layout`.
    """

    floor_rows: np.ndarray
    ceiling_rows: np.ndarray
    corners: tuple[Corner, ...] = field(default_factory=tuple)

    def __post_init__(self):
        floor = frozen_array(as_float_vector(self.floor_rows, "floor_rows"))
        ceiling = frozen_array(as_float_vector(self.ceiling_rows, "ceiling_rows"))
        check_same_length(floor, ceiling, "floor_rows", "ceiling_rows")
        object.__setattr__(self, "floor_rows", floor)
        object.__setattr__(self, "ceiling_rows", ceiling)
        object.__setattr__(self, "corners", _dedupe_corners(self.corners))

    @property
    def width(self) -> int:
        return self.floor_rows.shape[0]

    def corner_strengths(self) -> np.ndarray:
        """Dense per-column corner strength vector (0 where no corner)."""
        dense = np.zeros(self.width)
        for c in self.corners:
            dense[c.col] = c.strength
        return dense


@dataclass(frozen=True)
class BoundaryPrediction:
    """Per-column boundary mean and standard deviation, both in pixels."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = frozen_array(as_float_vector(self.mu, "mu"))
        sigma = frozen_array(as_float_vector(self.sigma, "sigma"))
        check_same_length(mu, sigma, "mu", "sigma")
        check_positive(sigma, "sigma")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def width(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class StageOutputs:
    """Everything one prediction stage emits for a panorama.

    ``floor`` is a :class:`BoundaryPrediction` for the uncertainty-aware
    initial stage and a plain row vector for the refinement stage. Corners
    are kept dense (one strength per column), matching the head output.
    """

    floor: BoundaryPrediction | np.ndarray
    ceiling_rows: np.ndarray
    wall_depth: np.ndarray
    corners: np.ndarray

    def __post_init__(self):
        if not isinstance(self.floor, BoundaryPrediction):
            object.__setattr__(
                self, "floor", frozen_array(as_float_vector(self.floor, "floor"))
            )
        ceiling = frozen_array(as_float_vector(self.ceiling_rows, "ceiling_rows"))
        depth = frozen_array(as_float_vector(self.wall_depth, "wall_depth"))
        corners = frozen_array(as_float_vector(self.corners, "corners"))
        check_positive(depth, "wall_depth")
        object.__setattr__(self, "ceiling_rows", ceiling)
        object.__setattr__(self, "wall_depth", depth)
        object.__setattr__(self, "corners", corners)

    @property
    def floor_rows(self) -> np.ndarray:
        return self.floor.mu if isinstance(self.floor, BoundaryPrediction) else self.floor


def _dedupe_corners(corners) -> tuple[Corner, ...]:
    out: dict[int, Corner] = {}
    for c in corners:
        c = c if isinstance(c, Corner) else Corner(int(c[0]), float(c[1]))
        if c.col in out:
            warnings.warn(f"duplicate corner at column {c.col}; keeping the last entry")
        out[c.col] = c
    return tuple(out[k] for k in sorted(out))


def validate_layout(camera: CameraModel, layout: Layout) -> Layout:
    """Check the camera-dependent layout invariants; returns the layout."""
    w = camera.image_width
    horizon = camera.horizon_row
    if layout.width != w:
        raise ValueError(f"layout has {layout.width} columns, camera expects {w}")
    floor, ceiling = layout.floor_rows, layout.ceiling_rows
    bad = np.flatnonzero(~((floor > horizon) & (floor < camera.image_height)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"floor row at column {i} is {floor[i]}, must lie strictly below "
            f"the horizon row {horizon} and inside the image"
        )
    bad = np.flatnonzero(~((ceiling < horizon) & (ceiling >= 0)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"ceiling row at column {i} is {ceiling[i]}, must lie strictly above "
            f"the horizon row {horizon} and inside the image"
        )
    for c in layout.corners:
        if not 0 <= c.col < w:
            raise ValueError(f"corner column {c.col} outside [0, {w})")
    return layout


# ---------------------------------------------------------------------------
# JSON serialization
#
# One schema is used for ground truth, predictions, and merged outputs:
#   {"camera": {"width", "height", "camera_height_m"},
#    "floor_rows": [...], "ceiling_rows": [...],
#    "corners": [{"col", "strength"}], "sigma_rows": [...]?}
# sigma_rows is optional and only present for uncertainty-aware predictions.
# Files are UTF-8, NaN/Inf are rejected, and the writer is canonical: fixed
# key order and 9-decimal fixed-point floats, so equal layouts serialize to
# byte-identical files.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(float(x), ".9f")


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def layout_to_json(camera: CameraModel, layout: Layout,
                   sigma_rows: np.ndarray | None = None) -> str:
    """Render the canonical JSON document for a validated layout."""
    validate_layout(camera, layout)
    corners = ", ".join(
        '{"col": %d, "strength": %s}' % (c.col, _fmt(c.strength))
        for c in layout.corners
    )
    parts = [
        '{\n  "camera": {"width": %d, "height": %d, "camera_height_m": %s},'
        % (camera.image_width, camera.image_height, _fmt(camera.camera_height)),
        '  "floor_rows": %s,' % _fmt_list(layout.floor_rows),
        '  "ceiling_rows": %s,' % _fmt_list(layout.ceiling_rows),
    ]
    if sigma_rows is None:
        parts.append('  "corners": [%s]\n}' % corners)
    else:
        sigma = as_float_vector(sigma_rows, "sigma_rows", layout.width)
        check_positive(sigma, "sigma_rows")
        parts.append('  "corners": [%s],' % corners)
        parts.append('  "sigma_rows": %s\n}' % _fmt_list(sigma))
    return "\n".join(parts) + "\n"


def save_layout(camera: CameraModel, layout: Layout, path,
                sigma_rows: np.ndarray | None = None) -> None:
    """Write the layout JSON; bit-stable for equal inputs."""
    Path(path).write_text(layout_to_json(camera, layout, sigma_rows), encoding="utf-8")


def _reject_constant(token: str):
    raise ValueError(f"layout JSON must not contain {token}")


def parse_layout_json(text: str) -> tuple[CameraModel, Layout, np.ndarray | None]:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ValueError(f"layout JSON parse failure: {exc}") from exc
    try:
        cam = doc["camera"]
        camera = CameraModel(int(cam["width"]), int(cam["height"]),
                             float(cam["camera_height_m"]))
        corners = tuple(
            Corner(int(c["col"]), float(c["strength"])) for c in doc["corners"]
        )
        layout = Layout(doc["floor_rows"], doc["ceiling_rows"], corners)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"layout JSON missing or malformed field: {exc}") from exc
    validate_layout(camera, layout)
    sigma = None
    if "sigma_rows" in doc:
        sigma = as_float_vector(doc["sigma_rows"], "sigma_rows", layout.width)
        check_positive(sigma, "sigma_rows")
    return camera, layout, sigma


def load_layout(path) -> tuple[CameraModel, Layout]:
    """Load and validate a layout file, ignoring any sigma_rows."""
    camera, layout, _ = parse_layout_json(Path(path).read_text(encoding="utf-8"))
    return camera, layout


def load_prediction(path) -> tuple[CameraModel, Layout, np.ndarray | None]:
    """Load a layout file keeping the optional per-column sigma vector."""
    return parse_layout_json(Path(path).read_text(encoding="utf-8"))
