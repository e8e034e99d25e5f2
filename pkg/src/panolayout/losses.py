"""Training losses as differentiable nodes, with closed-form scalar twins.

All losses reduce by summation over columns, matching the per-column
formulas; per-column means are a reporting concern, not a loss concern.
The ``*_value`` twins are plain numpy evaluators used as oracles in tests
and for cheap reporting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .validation import as_float_vector

LOG_SQRT_TWO_PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LossWeights:
    """Weights balancing the total losses: corner term and depth term."""

    corner_weight: float = 10.0
    depth_weight: float = 5.0

    def __post_init__(self):
        if self.corner_weight < 0 or self.depth_weight < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossComponents:
    """The four per-stage component losses, as tensors or plain floats."""

    floor: Tensor | float
    ceiling: Tensor | float
    depth: Tensor | float
    corner: Tensor | float


def _pair(pred, target, name: str) -> tuple[Tensor, np.ndarray]:
    pred = ad.as_tensor(pred)
    target = as_float_vector(target, f"{name} target")
    if pred.shape != target.shape:
        raise ValueError(
            f"{name}: prediction shape {pred.shape} does not match target {target.shape}"
        )
    return pred, target


def nll_floor(mu, sigma, y) -> Tensor:
    """Gaussian negative log likelihood of the floor boundary, summed over columns.

    Per column: log(sigma * sqrt(2*pi)) + (y - mu)^2 / (2 * sigma^2).
    Unbounded below: at zero residual, shrinking sigma keeps decreasing it.
    """
    mu, y = _pair(mu, y, "floor")
    sigma = ad.as_tensor(sigma)
    if sigma.shape != mu.shape:
        raise ValueError(f"sigma shape {sigma.shape} does not match mu {mu.shape}")
    if np.any(sigma.data <= 0):
        bad = int(np.flatnonzero(sigma.data <= 0)[0])
        raise ValueError(f"sigma must be strictly positive; sigma[{bad}] = {sigma.data[bad]}")
    resid = ad.sub(mu, Tensor(y))
    quad = ad.div(ad.square(resid), ad.mul(ad.square(sigma), 2.0))
    return ad.sum_all(ad.add(ad.add(ad.log(sigma), LOG_SQRT_TWO_PI), quad))


def nll_floor_value(mu, sigma, y) -> float:
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be strictly positive")
    return float(np.sum(np.log(sigma) + LOG_SQRT_TWO_PI + (y - mu) ** 2 / (2.0 * sigma**2)))


def distance_aware_floor(yhat, y, d) -> Tensor:
    """Floor-boundary L1 re-weighted by per-column depth: sum |yhat - y| * d."""
    yhat, y = _pair(yhat, y, "floor")
    d = as_float_vector(d, "d", y.shape[0])
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise ValueError(f"d must be strictly positive; d[{bad}] = {d[bad]}")
    return ad.sum_all(ad.mul(ad.absolute(ad.sub(yhat, Tensor(y))), Tensor(d)))


def distance_aware_floor_value(yhat, y, d) -> float:
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("d must be strictly positive")
    return float(np.sum(np.abs(np.asarray(yhat) - np.asarray(y)) * d))


def depth_l1(dhat, d) -> Tensor:
    """Top-down wall depth error: sum |dhat - d|."""
    dhat, d = _pair(dhat, d, "depth")
    return ad.sum_all(ad.absolute(ad.sub(dhat, Tensor(d))))


def l1_sum(pred, target, name: str = "l1") -> Tensor:
    """Plain summed L1, used for the ceiling and corner terms."""
    pred, target = _pair(pred, target, name)
    return ad.sum_all(ad.absolute(ad.sub(pred, Tensor(target))))


def l1_value(pred, target) -> float:
    return float(np.sum(np.abs(np.asarray(pred) - np.asarray(target))))


def total_initial(components: LossComponents, weights: LossWeights) -> Tensor:
    """Initial-stage total: NLL floor + ceiling L1 + depth L1 + corner_weight * corner L1."""
    total = ad.add(ad.as_tensor(components.floor), ad.as_tensor(components.ceiling))
    total = ad.add(total, ad.as_tensor(components.depth))
    return ad.add(total, ad.mul(ad.as_tensor(components.corner), weights.corner_weight))


def total_refine(components: LossComponents, weights: LossWeights) -> Tensor:
    """Refinement total: distance-aware floor + depth_weight * depth L1
    + corner_weight * corner L1 + ceiling L1."""
    total = ad.add(ad.as_tensor(components.floor),
                   ad.mul(ad.as_tensor(components.depth), weights.depth_weight))
    total = ad.add(total, ad.mul(ad.as_tensor(components.corner), weights.corner_weight))
    return ad.add(total, ad.as_tensor(components.ceiling))
