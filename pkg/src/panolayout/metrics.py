"""Evaluation metrics: distance-binned mean depth error and top-down 2D IoU,
plus the boundary-shift perturbation study and the depth distribution
histogram.

Columns are binned by the ground-truth horizontal range, one-meter bins
1..10 with everything beyond 10 m clamped into the last bin; the per-column
error is the absolute range difference between the projected predicted and
ground-truth boundaries.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .layout import CameraModel, Layout
from .polygon import TopDownPolygon, rasterize, shared_grid
from .projection import floor_boundary_to_polygon, proj_floor_depth
from .validation import as_float_vector

N_BINS = 10


@dataclass(frozen=True)
class BinnedDepthError:
    """Per-bin accumulated absolute range error and column counts."""

    error_sums: np.ndarray
    counts: np.ndarray

    def means(self) -> np.ndarray:
        """Per-bin mean error; empty bins report 0."""
        out = np.zeros(N_BINS)
        np.divide(self.error_sums, self.counts, out=out, where=self.counts > 0)
        return out

    def merged(self, other: "BinnedDepthError") -> "BinnedDepthError":
        return BinnedDepthError(self.error_sums + other.error_sums,
                                self.counts + other.counts)


@dataclass(frozen=True)
class PanoramaResult:
    name: str
    binned: BinnedDepthError
    iou2d: float


@dataclass(frozen=True)
class EvalReport:
    """Aggregate over panoramas: pooled bin errors, mean 2D IoU."""

    bin_errors: np.ndarray
    bin_counts: np.ndarray
    iou2d: float
    per_panorama: tuple[PanoramaResult, ...] = field(default_factory=tuple)


def depth_error_binned(camera: CameraModel, pred_rows, gt_rows) -> BinnedDepthError:
    """Bin per-column |range(pred) - range(gt)| by ceil(range(gt)), clamped to 1..10."""
    pred_rows = as_float_vector(pred_rows, "pred_rows", camera.image_width)
    gt_rows = as_float_vector(gt_rows, "gt_rows", camera.image_width)
    rho_pred = proj_floor_depth(camera, pred_rows)
    rho_gt = proj_floor_depth(camera, gt_rows)
    bins = np.clip(np.ceil(rho_gt).astype(int), 1, N_BINS) - 1
    errors = np.abs(rho_pred - rho_gt)
    sums = np.bincount(bins, weights=errors, minlength=N_BINS)
    counts = np.bincount(bins, minlength=N_BINS)
    return BinnedDepthError(sums, counts)


def iou_2d(a: TopDownPolygon, b: TopDownPolygon, cell: float = 0.01) -> float:
    """Intersection over union of two top-down polygons by shared-grid
    even-odd rasterization. A zero-area union is defined as IoU 0."""
    origin, shape = shared_grid(a, b, cell)
    mask_a = rasterize(a, cell, origin, shape)
    mask_b = rasterize(b, cell, origin, shape)
    union = np.logical_or(mask_a, mask_b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(mask_a, mask_b).sum() / union)


def evaluate_boundary(camera: CameraModel, pred_rows, gt_rows,
                      name: str = "", cell: float = 0.01) -> PanoramaResult:
    """Binned depth error plus polygon IoU for one panorama."""
    binned = depth_error_binned(camera, pred_rows, gt_rows)
    iou = iou_2d(floor_boundary_to_polygon(camera, pred_rows),
                 floor_boundary_to_polygon(camera, gt_rows), cell)
    return PanoramaResult(name, binned, iou)


def aggregate(results) -> EvalReport:
    """Pool bins over panoramas; IoU is averaged per panorama.

    The merge is commutative, so partial results may arrive in any order;
    the stored breakdown is sorted by name for stable output.
    """
    results = sorted(results, key=lambda r: r.name)
    if not results:
        return EvalReport(np.zeros(N_BINS), np.zeros(N_BINS, dtype=int), 0.0, ())
    total = BinnedDepthError(np.zeros(N_BINS), np.zeros(N_BINS, dtype=np.int64))
    for r in results:
        total = total.merged(r.binned)
    iou = float(np.mean([r.iou2d for r in results]))
    return EvalReport(total.means(), total.counts.astype(int), iou, tuple(results))


@dataclass(frozen=True)
class PerturbationResult:
    """Top-down areas before and after a uniform boundary row shift."""

    area_original: float
    area_shifted: float
    pixel_shift: float
    image_height: int

    @property
    def area_error(self) -> float:
        return abs(self.area_shifted - self.area_original)

    @property
    def relative_image_error(self) -> float:
        """The shift as a fraction of image height: the image-space error
        that stays constant while the induced area error does not."""
        return abs(self.pixel_shift) / self.image_height


def perturbation_study(camera: CameraModel, layout: Layout,
                       pixel_shift: float) -> PerturbationResult:
    """Shift every floor row up by ``pixel_shift`` (toward the horizon) and
    compare shoelace areas of the induced top-down polygons.

    A positive shift moves the boundary toward the horizon, so walls appear
    farther and the area grows; a negative shift shrinks it. Either way the
    same pixel shift produces a larger area error for larger rooms.
    """
    area0 = floor_boundary_to_polygon(camera, layout.floor_rows).area()
    shifted = layout.floor_rows - pixel_shift
    horizon = camera.horizon_row
    bad = np.flatnonzero(shifted <= horizon)
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"shift of {pixel_shift} px pushes the floor row at column {i} "
            f"to or above the horizon"
        )
    area1 = floor_boundary_to_polygon(camera, shifted).area()
    return PerturbationResult(area0, area1, float(pixel_shift), camera.image_height)


def depth_histogram(dataset) -> np.ndarray:
    """Counts per 1 m range bin over all (camera, layout) pairs."""
    counts = np.zeros(N_BINS, dtype=np.int64)
    for camera, layout in dataset:
        rho = proj_floor_depth(camera, layout.floor_rows)
        bins = np.clip(np.ceil(rho).astype(int), 1, N_BINS) - 1
        counts += np.bincount(bins, minlength=N_BINS)
    return counts


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def report_to_dict(report: EvalReport) -> dict:
    return {
        "bin_errors_m": [round(float(e), 6) for e in report.bin_errors],
        "bin_counts": [int(c) for c in report.bin_counts],
        "iou2d": round(float(report.iou2d), 6),
        "per_panorama": [
            {
                "name": r.name,
                "bin_errors_m": [round(float(e), 6) for e in r.binned.means()],
                "bin_counts": [int(c) for c in r.binned.counts],
                "iou2d": round(float(r.iou2d), 6),
            }
            for r in report.per_panorama
        ],
    }


def report_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def report_text(report: EvalReport) -> str:
    """Aligned 11-column table: mean error per range bin 1..10, then 2D IoU."""
    header = ["GT depth (m)"] + [f"{b:>7d}" for b in range(1, N_BINS + 1)] + ["   2DIoU"]
    errors = ["mean err (m)"] + [f"{e:7.3f}" for e in report.bin_errors] \
        + [f"{100.0 * report.iou2d:7.2f}%"]
    counts = ["columns     "] + [f"{c:7d}" for c in report.bin_counts] + [f"{'':8s}"]
    return "\n".join(" ".join(row) for row in (header, errors, counts)) + "\n"


def histogram_csv(counts: np.ndarray) -> str:
    lines = ["bin_upper_m,count"]
    lines += [f"{b + 1},{int(c)}" for b, c in enumerate(counts)]
    return "\n".join(lines) + "\n"
