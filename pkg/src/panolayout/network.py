"""Height-compressing column feature network and per-column prediction head.

Four backbone feature maps of decreasing height are each squeezed to height
1 inside their own branch (height-only convolution, then max pooling over
the full remaining height, then a 1x1 channel projection), and the branch
outputs are concatenated along the channel axis. Height never gets reshaped
into channels, so channel positions keep their meaning per branch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

PAPER_BRANCH_SHAPES = ((32, 8), (64, 4), (128, 2), (256, 1))


@dataclass(frozen=True)
class CPHCConfig:
    """Branch input shapes (channels, height), shared width, branch output channels."""

    branch_shapes: tuple[tuple[int, int], ...] = PAPER_BRANCH_SHAPES
    width: int = 256
    branch_channels: int = 256
    kernel_h: int = 3

    def __post_init__(self):
        if not self.branch_shapes:
            raise ValueError("need at least one branch")
        for c, h in self.branch_shapes:
            if c < 1 or h < 1:
                raise ValueError(f"invalid branch shape ({c}, {h})")
        if self.width < 1 or self.branch_channels < 1:
            raise ValueError("width and branch_channels must be >= 1")
        if self.kernel_h % 2 == 0:
            raise ValueError("kernel_h must be odd")

    @property
    def out_channels(self) -> int:
        return self.branch_channels * len(self.branch_shapes)

    def input_shapes(self) -> tuple[tuple[int, int, int], ...]:
        return tuple((c, h, self.width) for c, h in self.branch_shapes)

    @classmethod
    def desk(cls) -> "CPHCConfig":
        """Narrow configuration for single-core training experiments."""
        return cls(branch_shapes=((8, 8), (16, 4), (32, 2), (64, 1)),
                   width=256, branch_channels=32)


def _uniform(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.uniform(-0.05, 0.05, size=shape))


def init_cphc_params(config: CPHCConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    for b, (c, _h) in enumerate(config.branch_shapes):
        params[f"branch{b}.conv.kernel"] = _uniform(rng, (c, c, config.kernel_h))
        params[f"branch{b}.conv.bias"] = _uniform(rng, (c,))
        params[f"branch{b}.proj.weight"] = _uniform(rng, (config.branch_channels, c))
        params[f"branch{b}.proj.bias"] = _uniform(rng, (config.branch_channels,))
    return params


def cphc(features, config: CPHCConfig, params: dict[str, Tensor]) -> Tensor:
    """Compress the four block feature maps to one (channels, 1, width) map.

    Each branch: height convolution -> relu -> max pool over the full height
    -> 1x1 projection to ``branch_channels``. Branches stay independent until
    the channel concatenation, and no op folds height into channels.
    """
    features = list(features)
    expected = config.input_shapes()
    if len(features) != len(expected):
        raise ValueError(f"expected {len(expected)} feature maps, got {len(features)}")
    outs = []
    for b, (feat, shape) in enumerate(zip(features, expected)):
        feat = ad.as_tensor(feat)
        if feat.shape != shape:
            raise ValueError(f"branch {b}: expected input shape {shape}, got {feat.shape}")
        x = ad.conv_h(feat, params[f"branch{b}.conv.kernel"], params[f"branch{b}.conv.bias"])
        x = ad.relu(x)
        if shape[1] > 1:
            x = ad.maxpool_h(x, shape[1])
        x = ad.dense(x, params[f"branch{b}.proj.weight"], params[f"branch{b}.proj.bias"])
        outs.append(x)
    return ad.concat_channels(outs)


@dataclass(frozen=True)
class HeadOutputs:
    """Per-column head outputs as graph nodes, each shaped (width,)."""

    mu: Tensor
    sigma: Tensor
    depth: Tensor
    ceiling: Tensor
    corner: Tensor

    def detached(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name).data.copy()
                for name in ("mu", "sigma", "depth", "ceiling", "corner")}


SIGMA_FLOOR = 1e-3


def init_head_params(in_channels: int, hidden: int,
                     rng: np.random.Generator) -> dict[str, Tensor]:
    return {
        "head.hidden.weight": _uniform(rng, (hidden, in_channels)),
        "head.hidden.bias": _uniform(rng, (hidden,)),
        "head.out.weight": _uniform(rng, (5, hidden)),
        "head.out.bias": _uniform(rng, (5,)),
    }


def column_head(feature: Tensor, params: dict[str, Tensor]) -> HeadOutputs:
    """Map a (channels, 1, width) feature map to the five per-column outputs.

    sigma = softplus(raw) + 1e-3 keeps the deviation strictly positive;
    depth goes through softplus, the corner strength through a logistic.
    """
    feature = ad.as_tensor(feature)
    hidden_w = params["head.hidden.weight"]
    if feature.data.ndim != 3 or feature.shape[0] != hidden_w.shape[1] or feature.shape[1] != 1:
        raise ValueError(
            f"column_head: expected feature ({hidden_w.shape[1]}, 1, width), got {feature.shape}"
        )
    h = ad.relu(ad.dense(feature, hidden_w, params["head.hidden.bias"]))
    raw = ad.dense(h, params["head.out.weight"], params["head.out.bias"])
    rows = [ad.flatten(ad.slice_channels(raw, i, i + 1)) for i in range(5)]
    return HeadOutputs(
        mu=rows[0],
        sigma=ad.add(ad.softplus(rows[1]), SIGMA_FLOOR),
        depth=ad.softplus(rows[2]),
        ceiling=rows[3],
        corner=ad.sigmoid(rows[4]),
    )


# ---------------------------------------------------------------------------
# Checkpoints: flat binary of float64 values plus a JSON shape manifest
# sidecar at <path>.json, tensors stored in sorted name order.
# ---------------------------------------------------------------------------

def save_params(params: dict[str, Tensor], path) -> None:
    path = Path(path)
    names = sorted(params)
    flat = np.concatenate([params[n].data.ravel() for n in names]) if names else np.empty(0)
    path.write_bytes(flat.astype("<f8").tobytes())
    manifest = {"dtype": "<f8", "tensors": [
        {"name": n, "shape": list(params[n].shape)} for n in names
    ]}
    Path(str(path) + ".json").write_text(json.dumps(manifest, indent=2) + "\n",
                                         encoding="utf-8")


def load_params(path) -> dict[str, Tensor]:
    path = Path(path)
    manifest = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    flat = np.frombuffer(path.read_bytes(), dtype=manifest["dtype"])
    params: dict[str, Tensor] = {}
    offset = 0
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        params[entry["name"]] = Tensor(flat[offset:offset + n].reshape(shape).copy())
        offset += n
    if offset != flat.size:
        raise ValueError(
            f"checkpoint size mismatch: manifest expects {offset} values, file has {flat.size}"
        )
    return params
