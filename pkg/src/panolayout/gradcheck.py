"""Central finite-difference gradient verification.

The numeric side only ever calls forward evaluations, so it stays an
independent oracle for the tape. ``standard_battery`` bundles seeded random
instances for every differentiable op and every composed loss. Instance
generators keep inputs a safe distance from the kinks of |.|, relu, and max
pooling (margins, or rejection sampling for pre-activations inside the
network), since finite differences are meaningless across a kink.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import losses, network
from . import autodiff as ad
from .autodiff import Tensor

EPSILON = 1e-5
TOLERANCE = 1e-4
KINK_MARGIN = 2e-4


def numerical_gradient(fn: Callable[[], float], arrays: Sequence[np.ndarray],
                       eps: float = EPSILON) -> list[np.ndarray]:
    """Central differences of a scalar function of in-place mutable arrays."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gf = a.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = fn()
            flat[i] = orig - eps
            f_minus = fn()
            flat[i] = orig
            gf[i] = (f_plus - f_minus) / (2.0 * eps)
        grads.append(g)
    return grads


def max_relative_deviation(analytic: Sequence[np.ndarray],
                           numeric: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / scale)))
    return worst


def check_function(build: Callable[[list[Tensor]], Tensor],
                   arrays: Sequence[np.ndarray], eps: float = EPSILON) -> float:
    """Compare tape gradients of ``build`` against finite differences.

    ``build`` maps a list of leaf tensors to a scalar tensor; ``arrays`` are
    the leaf values, each differentiated entry by entry.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    leaves = [Tensor(a.copy()) for a in arrays]
    out = build(leaves)
    out.backward()
    analytic = [np.zeros_like(a) if t.grad is None else t.grad.copy()
                for a, t in zip(arrays, leaves)]
    numeric = numerical_gradient(lambda: build([Tensor(a) for a in arrays]).item(), arrays, eps)
    return max_relative_deviation(analytic, numeric)


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    max_deviation: float
    instances: int

    @property
    def passed(self) -> bool:
        return self.max_deviation < TOLERANCE


def _margin(rng, shape, low=0.1, high=1.0):
    """Values with |x| in [low, high]: safe distance from |.| and relu kinks."""
    return rng.uniform(low, high, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _separated(rng, shape):
    """Distinct well-separated values, safe for argmax under perturbation."""
    n = int(np.prod(shape))
    return rng.permutation(np.linspace(-1.0, 1.0, n)).reshape(shape)


def _op_cases(rng) -> dict[str, Callable]:
    def binary(op):
        def make():
            a = rng.standard_normal((5, 7))
            b = _margin(rng, (5, 7), low=0.5, high=1.5)  # bounded away from 0 for div
            return (lambda ts: ad.sum_all(ad.square(op(ts[0], ts[1])))), [a, b]
        return make

    def unary(op, sampler):
        def make():
            x = sampler((6, 4))
            return (lambda ts: ad.sum_all(ad.square(op(ts[0])))), [x]
        return make

    def dense_vec():
        x = rng.standard_normal(7)
        w = rng.standard_normal((4, 7))
        b = rng.standard_normal(4)
        return (lambda ts: ad.sum_all(ad.square(ad.dense(ts[0], ts[1], ts[2])))), [x, w, b]

    def dense_map():
        x = rng.standard_normal((3, 2, 5))
        w = rng.standard_normal((4, 3))
        b = rng.standard_normal(4)
        return (lambda ts: ad.sum_all(ad.square(ad.dense(ts[0], ts[1], ts[2])))), [x, w, b]

    def conv():
        x = rng.standard_normal((3, 4, 6))
        k = rng.standard_normal((2, 3, 3))
        b = rng.standard_normal(2)
        return (lambda ts: ad.sum_all(ad.square(ad.conv_h(ts[0], ts[1], ts[2])))), [x, k, b]

    def maxpool():
        k = int(rng.choice([2, 4, 8]))
        x = _separated(rng, (2, 8, 4))
        return (lambda ts: ad.sum_all(ad.square(ad.maxpool_h(ts[0], k)))), [x]

    def avgpool():
        k = int(rng.choice([2, 4]))
        x = rng.standard_normal((2, 4, 5))
        return (lambda ts: ad.sum_all(ad.square(ad.avgpool_h(ts[0], k)))), [x]

    def upsample():
        x = rng.standard_normal((2, 3, 4))
        return (lambda ts: ad.sum_all(ad.square(ad.upsample_w(ts[0], 2)))), [x]

    def concat():
        xs = [rng.standard_normal((c, 3, 4)) for c in (2, 1, 4)]
        return (lambda ts: ad.sum_all(ad.square(ad.concat_channels(ts)))), xs

    def chan_slice():
        x = rng.standard_normal((5, 3, 4))
        return (lambda ts: ad.sum_all(ad.square(ad.slice_channels(ts[0], 1, 4)))), [x]

    def flat():
        x = rng.standard_normal((2, 3, 4))
        return (lambda ts: ad.sum_all(ad.sigmoid(ad.flatten(ts[0])))), [x]

    return {
        "add": binary(ad.add),
        "sub": binary(ad.sub),
        "mul": binary(ad.mul),
        "div": binary(ad.div),
        "neg": unary(ad.neg, lambda s: rng.standard_normal(s)),
        "square": unary(ad.square, lambda s: rng.standard_normal(s)),
        "absolute": unary(ad.absolute, lambda s: _margin(rng, s)),
        "log": unary(ad.log, lambda s: rng.uniform(0.2, 2.0, size=s)),
        "exp": unary(ad.exp, lambda s: rng.standard_normal(s)),
        "relu": unary(ad.relu, lambda s: _margin(rng, s)),
        "softplus": unary(ad.softplus, lambda s: rng.standard_normal(s)),
        "sigmoid": unary(ad.sigmoid, lambda s: rng.standard_normal(s)),
        "sum_all": unary(lambda t: t, lambda s: rng.standard_normal(s)),
        "flatten": flat,
        "dense(vector)": dense_vec,
        "dense(map)": dense_map,
        "conv_h": conv,
        "maxpool_h": maxpool,
        "avgpool_h": avgpool,
        "upsample_w": upsample,
        "concat_channels": concat,
        "slice_channels": chan_slice,
    }


def _loss_cases(rng) -> dict[str, Callable]:
    w = 12
    weights = losses.LossWeights()

    def nll():
        y = rng.uniform(80.0, 120.0, size=w)
        mu = y + rng.standard_normal(w)
        sigma = rng.uniform(0.5, 2.0, size=w)
        return (lambda ts: losses.nll_floor(ts[0], ts[1], y)), [mu, sigma]

    def dist_floor():
        y = rng.uniform(80.0, 120.0, size=w)
        yhat = y + _margin(rng, w)
        d = rng.uniform(0.5, 9.0, size=w)
        return (lambda ts: losses.distance_aware_floor(ts[0], y, d)), [yhat]

    def depth():
        d = rng.uniform(0.5, 9.0, size=w)
        dhat = d + _margin(rng, w)
        return (lambda ts: losses.depth_l1(ts[0], d)), [dhat]

    def ceiling():
        y = rng.uniform(10.0, 50.0, size=w)
        pred = y + _margin(rng, w)
        return (lambda ts: losses.l1_sum(ts[0], y, "ceiling")), [pred]

    def initial_total():
        y = rng.uniform(80.0, 120.0, size=w)
        ceil_t = rng.uniform(10.0, 50.0, size=w)
        depth_t = rng.uniform(0.5, 9.0, size=w)
        corner_t = rng.uniform(0.0, 1.0, size=w)
        mu = y + rng.standard_normal(w)
        sigma = rng.uniform(0.5, 2.0, size=w)
        preds = [ceil_t + _margin(rng, w), depth_t + _margin(rng, w),
                 corner_t + _margin(rng, w)]

        def build(ts):
            comp = losses.LossComponents(
                floor=losses.nll_floor(ts[0], ts[1], y),
                ceiling=losses.l1_sum(ts[2], ceil_t, "ceiling"),
                depth=losses.depth_l1(ts[3], depth_t),
                corner=losses.l1_sum(ts[4], corner_t, "corner"),
            )
            return losses.total_initial(comp, weights)

        return build, [mu, sigma] + preds

    def refine_total():
        y = rng.uniform(80.0, 120.0, size=w)
        d = rng.uniform(0.5, 9.0, size=w)
        ceil_t = rng.uniform(10.0, 50.0, size=w)
        corner_t = rng.uniform(0.0, 1.0, size=w)
        preds = [y + _margin(rng, w), ceil_t + _margin(rng, w),
                 d + _margin(rng, w), corner_t + _margin(rng, w)]

        def build(ts):
            comp = losses.LossComponents(
                floor=losses.distance_aware_floor(ts[0], y, d),
                ceiling=losses.l1_sum(ts[1], ceil_t, "ceiling"),
                depth=losses.depth_l1(ts[2], d),
                corner=losses.l1_sum(ts[3], corner_t, "corner"),
            )
            return losses.total_refine(comp, weights)

        return build, preds

    return {
        "loss:nll_floor": nll,
        "loss:distance_aware_floor": dist_floor,
        "loss:depth_l1": depth,
        "loss:ceiling_l1": ceiling,
        "loss:total_initial": initial_total,
        "loss:total_refine": refine_total,
    }


TINY_CONFIG = network.CPHCConfig(
    branch_shapes=((2, 8), (2, 4), (3, 2), (3, 1)), width=4, branch_channels=3
)
_TINY_HIDDEN = 5


def _draw_net_params(rng, cfg: network.CPHCConfig, hidden: int) -> dict[str, Tensor]:
    """Small weights, but biases pushed away from zero so relu pre-activations
    sit a safe distance from their kink."""
    params = {}
    for b, (c, _h) in enumerate(cfg.branch_shapes):
        params[f"branch{b}.conv.kernel"] = Tensor(rng.uniform(-0.05, 0.05, (c, c, cfg.kernel_h)))
        params[f"branch{b}.conv.bias"] = Tensor(_margin(rng, (c,), low=0.5, high=0.8))
        params[f"branch{b}.proj.weight"] = Tensor(rng.uniform(-0.2, 0.2, (cfg.branch_channels, c)))
        params[f"branch{b}.proj.bias"] = Tensor(rng.uniform(-0.2, 0.2, (cfg.branch_channels,)))
    params["head.hidden.weight"] = Tensor(rng.uniform(-0.05, 0.05, (hidden, cfg.out_channels)))
    params["head.hidden.bias"] = Tensor(_margin(rng, (hidden,), low=0.5, high=0.8))
    params["head.out.weight"] = Tensor(rng.uniform(-0.2, 0.2, (5, hidden)))
    params["head.out.bias"] = Tensor(_margin(rng, (5,), low=0.5, high=0.8))
    return params


def _pool_gap_ok(values: np.ndarray, k: int) -> bool:
    """Top-two gap in every pooling window exceeds the kink margin.

    Fully dead relu windows (max exactly 0) are stable: every entry stays
    pinned at 0 under a small perturbation, so they are exempt."""
    c, h, w = values.shape
    blocks = values.reshape(c, h // k, k, w)
    if k == 1:
        return True
    top2 = np.sort(blocks, axis=2)[:, :, -2:, :]
    gap_ok = top2[:, :, 1, :] - top2[:, :, 0, :] > KINK_MARGIN
    dead = top2[:, :, 1, :] == 0.0
    return bool(np.all(gap_ok | dead))


def _net_margins_ok(feats, cfg: network.CPHCConfig, params: dict[str, Tensor]) -> bool:
    pooled = []
    for b, (c, h) in enumerate(cfg.branch_shapes):
        pre = ad.conv_h(Tensor(feats[b]), params[f"branch{b}.conv.kernel"],
                        params[f"branch{b}.conv.bias"]).data
        if np.any(np.abs(pre) < KINK_MARGIN):
            return False
        post = np.maximum(pre, 0.0)
        if h > 1 and not _pool_gap_ok(post, h):
            return False
        proj = params[f"branch{b}.proj.weight"].data
        pooled.append(proj @ post.max(axis=1) + params[f"branch{b}.proj.bias"].data[:, None])
    feat = np.concatenate(pooled, axis=0)
    hidden_pre = params["head.hidden.weight"].data @ feat + params["head.hidden.bias"].data[:, None]
    return not np.any(np.abs(hidden_pre) < KINK_MARGIN)


def _draw_net_instance(rng, cfg: network.CPHCConfig, hidden: int):
    for _ in range(50):
        params = _draw_net_params(rng, cfg, hidden)
        feats = [rng.standard_normal(s) for s in cfg.input_shapes()]
        if _net_margins_ok(feats, cfg, params):
            return feats, params
    raise RuntimeError("could not draw a kink-safe network instance")


def _network_cases(rng) -> dict[str, Callable]:
    cfg = TINY_CONFIG

    def cphc_case():
        feats, params = _draw_net_instance(rng, cfg, _TINY_HIDDEN)
        names = [n for n in sorted(params) if n.startswith("branch")]
        arrays = feats + [params[n].data for n in names]

        def build(ts):
            p = {n: t for n, t in zip(names, ts[len(feats):])}
            return ad.sum_all(ad.square(network.cphc(ts[:len(feats)], cfg, p)))

        return build, arrays

    def head_case():
        feats, params = _draw_net_instance(rng, cfg, _TINY_HIDDEN)
        with_np = {n: t for n, t in params.items()}
        feat = network.cphc([Tensor(f) for f in feats], cfg, with_np).data
        names = [n for n in sorted(params) if n.startswith("head")]
        mix = [rng.standard_normal(cfg.width) for _ in range(5)]
        arrays = [feat] + [params[n].data for n in names]

        def build(ts):
            p = {n: t for n, t in zip(names, ts[1:])}
            out = network.column_head(ts[0], p)
            total = None
            for node, m in zip((out.mu, out.sigma, out.depth, out.ceiling, out.corner), mix):
                part = ad.sum_all(ad.mul(node, Tensor(m)))
                total = part if total is None else ad.add(total, part)
            return total

        return build, arrays

    def pipeline_case():
        feats, params = _draw_net_instance(rng, cfg, _TINY_HIDDEN)
        names = sorted(params)
        out = network.column_head(
            network.cphc([Tensor(f) for f in feats], cfg, params), params
        ).detached()
        # place L1 targets a fixed distance from the actual outputs so the
        # absolute-value kinks stay clear of the finite-difference window
        y = out["mu"] + rng.standard_normal(cfg.width)
        ceil_t = out["ceiling"] + _margin(rng, cfg.width, low=0.5, high=1.0)
        depth_t = out["depth"] + rng.uniform(0.5, 1.0, size=cfg.width)
        corner_t = out["corner"] + 0.15
        arrays = [params[n].data for n in names]

        def build(ts):
            p = {n: t for n, t in zip(names, ts)}
            head = network.column_head(network.cphc(feats, cfg, p), p)
            comp = losses.LossComponents(
                floor=losses.nll_floor(head.mu, head.sigma, y),
                ceiling=losses.l1_sum(head.ceiling, ceil_t, "ceiling"),
                depth=losses.depth_l1(head.depth, depth_t),
                corner=losses.l1_sum(head.corner, corner_t, "corner"),
            )
            return losses.total_initial(comp, losses.LossWeights())

        return build, arrays

    return {
        "cphc": cphc_case,
        "column_head": head_case,
        "pipeline:cphc+head+nll_total": pipeline_case,
    }


def standard_battery(seed: int, trials: int = 100) -> list[GradCheckResult]:
    """Run every op, loss, and network case ``trials`` times each."""
    rng = np.random.default_rng(seed)
    cases: dict[str, Callable] = {}
    cases.update(_op_cases(rng))
    cases.update(_loss_cases(rng))
    cases.update(_network_cases(rng))
    results = []
    for name, make in cases.items():
        worst = 0.0
        for _ in range(trials):
            build, arrays = make()
            worst = max(worst, check_function(build, arrays))
        results.append(GradCheckResult(name, worst, trials))
    return results
