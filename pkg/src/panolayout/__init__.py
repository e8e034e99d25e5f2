"""Two-stage panoramic room layout toolkit.

Projection geometry, uncertainty-aware and distance-aware losses over a
tape-based autodiff core, height-compressed column features, pano-stretch
augmentation, uncertainty-guided merging, and top-down evaluation metrics,
all at desk scale.
"""

from .augment import (
    StretchParams,
    flip_lr,
    luminance,
    rotate_horizontal,
    sample_stretch_params,
    stretch_image,
    stretch_layout,
)
from .autodiff import Tensor
from .estimators import StageEstimator, TwoStageLayoutEstimator
from .layout import (
    BoundaryPrediction,
    CameraModel,
    Corner,
    Layout,
    StageOutputs,
    load_layout,
    load_prediction,
    save_layout,
    validate_layout,
)
from .losses import (
    LossComponents,
    LossWeights,
    depth_l1,
    distance_aware_floor,
    l1_sum,
    nll_floor,
    total_initial,
    total_refine,
)
from .merging import MergeConfig, merge
from .metrics import (
    EvalReport,
    depth_error_binned,
    depth_histogram,
    evaluate_boundary,
    iou_2d,
    perturbation_study,
)
from .network import CPHCConfig, column_head, cphc, load_params, save_params
from .polygon import TopDownPolygon
from .projection import (
    SphericalCoord,
    TopDownPoint,
    floor_boundary_to_polygon,
    floor_row_for_range,
    pixel_to_spherical,
    proj_floor_depth,
    spherical_to_pixel,
    uncertainty_score,
)
from .synthetic import RoomSample, SyntheticRoomSpec, build_dataset, generate_room
from .training import TrainResult, train_stage

__version__ = "0.1.0"

__all__ = [
    "BoundaryPrediction",
    "CameraModel",
    "Corner",
    "CPHCConfig",
    "EvalReport",
    "Layout",
    "LossComponents",
    "LossWeights",
    "MergeConfig",
    "RoomSample",
    "SphericalCoord",
    "StageEstimator",
    "StageOutputs",
    "StretchParams",
    "SyntheticRoomSpec",
    "Tensor",
    "TopDownPoint",
    "TopDownPolygon",
    "TrainResult",
    "TwoStageLayoutEstimator",
    "build_dataset",
    "column_head",
    "cphc",
    "depth_error_binned",
    "depth_histogram",
    "depth_l1",
    "distance_aware_floor",
    "evaluate_boundary",
    "flip_lr",
    "floor_boundary_to_polygon",
    "floor_row_for_range",
    "generate_room",
    "iou_2d",
    "l1_sum",
    "load_layout",
    "load_params",
    "load_prediction",
    "luminance",
    "merge",
    "nll_floor",
    "perturbation_study",
    "pixel_to_spherical",
    "proj_floor_depth",
    "rotate_horizontal",
    "sample_stretch_params",
    "save_layout",
    "save_params",
    "spherical_to_pixel",
    "stretch_image",
    "stretch_layout",
    "total_initial",
    "total_refine",
    "train_stage",
    "uncertainty_score",
    "validate_layout",
]
