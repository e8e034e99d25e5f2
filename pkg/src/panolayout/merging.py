"""Uncertainty-guided per-column merging of the two stage predictions.

A column takes the refinement value only when the initial stage is both
uncertain about it (projected uncertainty above the threshold) and believes
the wall is distant (projected range beyond the gate); everything else keeps
the initial prediction. Selection is a hard switch, never a blend.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layout import BoundaryPrediction, CameraModel
from .projection import proj_floor_depth, uncertainty_score
from .validation import as_float_vector, check_scalar


@dataclass(frozen=True)
class MergeConfig:
    """Thresholds for the two merge gates, in meters.

    ``distance_source`` picks where the per-column distance estimate comes
    from: "boundary" projects the initial stage's own mean boundary (the
    default), "depth" uses the separately predicted wall depth, which must
    then be passed to :func:`merge`.
    """

    uncertainty_threshold: float = 0.2
    distance_gate: float = 5.0
    distance_source: str = "boundary"

    def __post_init__(self):
        check_scalar(self.uncertainty_threshold, "uncertainty_threshold",
                     minimum=0.0, strict_min=True)
        check_scalar(self.distance_gate, "distance_gate", minimum=0.0, strict_min=True)
        if self.distance_source not in ("boundary", "depth"):
            raise ValueError(
                f"distance_source must be 'boundary' or 'depth', got {self.distance_source!r}"
            )


def merge_mask(camera: CameraModel, initial: BoundaryPrediction,
               cfg: MergeConfig, depth: np.ndarray | None = None) -> np.ndarray:
    """Boolean vector of columns whose refinement value is selected."""
    uncertainty = uncertainty_score(camera, initial)
    if cfg.distance_source == "depth":
        if depth is None:
            raise ValueError("distance_source 'depth' requires a depth vector")
        distance = as_float_vector(depth, "depth", initial.width)
    else:
        distance = proj_floor_depth(camera, initial.mu)
    return (uncertainty > cfg.uncertainty_threshold) & (distance > cfg.distance_gate)


def merge(camera: CameraModel, initial: BoundaryPrediction, refine_rows,
          cfg: MergeConfig = MergeConfig(), depth: np.ndarray | None = None) -> np.ndarray:
    """Column-wise selection between the two stages' floor boundaries.

    Ties at either threshold resolve to the initial stage. The output row at
    column i is exactly one of initial.mu[i] or refine_rows[i].
    """
    refine_rows = as_float_vector(refine_rows, "refine_rows", initial.width)
    if initial.width != camera.image_width:
        raise ValueError(
            f"prediction has {initial.width} columns, camera expects {camera.image_width}"
        )
    horizon = camera.horizon_row
    bad = np.flatnonzero(~((refine_rows > horizon) & (refine_rows < camera.image_height)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"refine row at column {i} is {refine_rows[i]}, must lie strictly "
            f"below the horizon row {horizon}"
        )
    mask = merge_mask(camera, initial, cfg, depth)
    return np.where(mask, refine_rows, initial.mu)
