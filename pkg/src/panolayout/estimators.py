"""scikit-learn style estimators wrapping the two-stage training pipeline.

``StageEstimator`` is the fit/predict surface of one stage;
``TwoStageLayoutEstimator`` fits both stages and merges their floor
boundaries per column at prediction time. Both follow the usual estimator
conventions: constructor arguments are stored verbatim, ``fit`` returns
self, fitted state carries a trailing underscore, and ``get_params`` /
``set_params`` come from ``BaseEstimator`` so the classes clone and compose
with the wider ecosystem.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError

from .layout import BoundaryPrediction, StageOutputs
from .losses import LossWeights
from .merging import MergeConfig, merge
from .network import CPHCConfig
from .training import head_to_stage_outputs, predict_stage, train_stage


def _check_rooms(X) -> list:
    rooms = list(X)
    if not rooms:
        raise ValueError("X must be a non-empty sequence of RoomSample")
    for r in rooms:
        if not hasattr(r, "camera") or not hasattr(r, "features"):
            raise ValueError(f"expected RoomSample-like items, got {type(r).__name__}")
    return rooms


class StageEstimator(BaseEstimator):
    """One prediction stage trained by gradient descent on synthetic rooms.

    Parameters mirror the training harness; ``stage`` selects the loss:
    "initial" trains boundary mean and sigma under the Gaussian NLL,
    "refine" trains under the distance-aware losses with magnifying
    pano-stretch augmentation re-drawn every epoch.
    """

    def __init__(self, stage: str = "initial", epochs: int = 200,
                 learning_rate: float = 1.2e-5, seed: int = 0, hidden: int = 32,
                 corner_weight: float = 10.0, depth_weight: float = 5.0,
                 lr_decay_epochs: float | None = 100.0,
                 config: CPHCConfig | None = None):
        self.stage = stage
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.hidden = hidden
        self.corner_weight = corner_weight
        self.depth_weight = depth_weight
        self.lr_decay_epochs = lr_decay_epochs
        self.config = config

    def fit(self, X, y=None):
        rooms = _check_rooms(X)
        weights = LossWeights(self.corner_weight, self.depth_weight)
        self.result_ = train_stage(
            self.stage, rooms, self.epochs, self.learning_rate, self.seed,
            config=self.config, hidden=self.hidden, weights=weights,
            lr_decay_epochs=self.lr_decay_epochs,
        )
        self.loss_trace_ = list(self.result_.loss_trace)
        return self

    def _fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("StageEstimator must be fitted before predicting")
        return self.result_

    def predict(self, X) -> list[StageOutputs]:
        result = self._fitted()
        return [predict_stage(result, r.camera, r.features) for r in _check_rooms(X)]


class TwoStageLayoutEstimator(BaseEstimator):
    """Full pipeline: initial stage, refinement stage, uncertainty-guided merge.

    ``predict`` returns one merged floor-row vector per sample. Raw stage
    outputs are clamped into the valid below-horizon band before merging so
    a weakly trained model still produces projectable boundaries.
    """

    def __init__(self, initial: StageEstimator | None = None,
                 refine: StageEstimator | None = None,
                 uncertainty_threshold: float = 0.2, distance_gate: float = 5.0):
        self.initial = initial
        self.refine = refine
        self.uncertainty_threshold = uncertainty_threshold
        self.distance_gate = distance_gate

    def fit(self, X, y=None):
        rooms = _check_rooms(X)
        initial = self.initial if self.initial is not None else StageEstimator("initial")
        refine = self.refine if self.refine is not None else StageEstimator("refine")
        if initial.stage != "initial" or refine.stage != "refine":
            raise ValueError("sub-estimators must have stage 'initial' and 'refine'")
        self.initial_ = clone(initial).fit(rooms)
        self.refine_ = clone(refine).fit(rooms)
        self.merge_config_ = MergeConfig(self.uncertainty_threshold, self.distance_gate)
        return self

    def predict(self, X) -> list[np.ndarray]:
        if not hasattr(self, "initial_"):
            raise NotFittedError("TwoStageLayoutEstimator must be fitted before predicting")
        rooms = _check_rooms(X)
        merged = []
        for room, init_out, ref_out in zip(
            rooms, self.initial_.predict(rooms), self.refine_.predict(rooms)
        ):
            camera = room.camera
            lo = camera.horizon_row + 0.25
            hi = camera.image_height - 0.5
            initial = BoundaryPrediction(
                np.clip(init_out.floor.mu, lo, hi),
                np.minimum(init_out.floor.sigma, hi - np.clip(init_out.floor.mu, lo, hi) + 1e-6),
            )
            refine_rows = np.clip(ref_out.floor_rows, lo, hi)
            merged.append(merge(camera, initial, refine_rows, self.merge_config_))
        return merged
