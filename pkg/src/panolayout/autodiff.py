"""Minimal dense tensor with tape-based reverse-mode gradients.

Feature maps are (channels, height, width) float64 arrays at desk scale.
Each op records its inputs and a backward closure; calling ``backward()`` on
a scalar result walks the recorded graph in reverse topological order and
accumulates gradients into every participating tensor. Everything is plain
numpy, single threaded, and bit-deterministic for fixed inputs.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """A float64 array plus the tape bookkeeping needed for backward."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents: tuple = (), _backward: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate grads of all tensors reachable from this scalar."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # arithmetic sugar; the module-level ops do the real work
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: expected matching shapes, got {a.shape} vs {b.shape}")


def _binary(a, b, op: str):
    """Normalize operands: Tensor op Tensor (same shape) or Tensor op scalar."""
    a_scalar = not isinstance(a, Tensor)
    b_scalar = not isinstance(b, Tensor)
    if a_scalar:
        a = Tensor(np.float64(a))
    if b_scalar:
        b = Tensor(np.float64(b))
    if a.data.ndim and b.data.ndim:
        _check_same_shape(a, b, op)
    return a, b


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return g.sum() if shape == () and np.ndim(g) else g


def add(a, b) -> Tensor:
    a, b = _binary(a, b, "add")

    def bwd(g):
        a._accumulate(_reduce_to(g, a.shape))
        b._accumulate(_reduce_to(g, b.shape))

    return Tensor(a.data + b.data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _binary(a, b, "sub")

    def bwd(g):
        a._accumulate(_reduce_to(g, a.shape))
        b._accumulate(_reduce_to(-g, b.shape))

    return Tensor(a.data - b.data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _binary(a, b, "mul")

    def bwd(g):
        a._accumulate(_reduce_to(g * b.data, a.shape))
        b._accumulate(_reduce_to(g * a.data, b.shape))

    return Tensor(a.data * b.data, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _binary(a, b, "div")

    def bwd(g):
        a._accumulate(_reduce_to(g / b.data, a.shape))
        b._accumulate(_reduce_to(-g * a.data / (b.data * b.data), b.shape))

    return Tensor(a.data / b.data, (a, b), bwd)


def neg(x: Tensor) -> Tensor:
    return Tensor(-x.data, (x,), lambda g: x._accumulate(-g))


def square(x: Tensor) -> Tensor:
    return Tensor(x.data * x.data, (x,), lambda g: x._accumulate(2.0 * x.data * g))


def absolute(x: Tensor) -> Tensor:
    return Tensor(np.abs(x.data), (x,), lambda g: x._accumulate(np.sign(x.data) * g))


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise ValueError("log requires strictly positive input")
    return Tensor(np.log(x.data), (x,), lambda g: x._accumulate(g / x.data))


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)
    return Tensor(out_data, (x,), lambda g: x._accumulate(g * out_data))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0.0), (x,), lambda g: x._accumulate(g * mask))


def softplus(x: Tensor) -> Tensor:
    out_data = np.logaddexp(0.0, x.data)
    sig = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor(out_data, (x,), lambda g: x._accumulate(g * sig))


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor(s, (x,), lambda g: x._accumulate(g * s * (1.0 - s)))


def sum_all(x: Tensor) -> Tensor:
    return Tensor(x.data.sum(), (x,), lambda g: x._accumulate(np.full_like(x.data, float(g))))


def flatten(x: Tensor) -> Tensor:
    shape = x.shape
    return Tensor(x.data.reshape(-1), (x,), lambda g: x._accumulate(g.reshape(shape)))


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map over the leading (channel) axis.

    For a vector x of shape (n,): weight (m, n) @ x + bias (m,).
    For a feature map x of shape (c, h, w): the same (m, c) weight is applied
    to every column independently, yielding (m, h, w) - a 1x1 convolution.
    """
    m, n = weight.shape
    if x.data.ndim == 1:
        if x.shape != (n,) or bias.shape != (m,):
            raise ValueError(
                f"dense: expected x ({n},) and bias ({m},), got x {x.shape}, bias {bias.shape}"
            )

        def bwd(g):
            weight._accumulate(np.outer(g, x.data))
            bias._accumulate(g)
            x._accumulate(weight.data.T @ g)

        return Tensor(weight.data @ x.data + bias.data, (x, weight, bias), bwd)

    if x.data.ndim == 3:
        c, h, w = x.shape
        if c != n or bias.shape != (m,):
            raise ValueError(
                f"dense: expected x ({n}, h, w) and bias ({m},), got x {x.shape}, bias {bias.shape}"
            )
        flat = x.data.reshape(c, h * w)

        def bwd(g):
            gf = g.reshape(m, h * w)
            weight._accumulate(gf @ flat.T)
            bias._accumulate(gf.sum(axis=1))
            x._accumulate((weight.data.T @ gf).reshape(c, h, w))

        out_data = (weight.data @ flat + bias.data[:, None]).reshape(m, h, w)
        return Tensor(out_data, (x, weight, bias), bwd)

    raise ValueError(f"dense: expected 1-D or 3-D input, got shape {x.shape}")


def conv_h(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Convolution along the height axis only: stride 1, zero pad, same height.

    x is (c_in, h, w), kernel (c_out, c_in, k) with odd k; every width column
    is filtered independently, so no information crosses columns.
    """
    if x.data.ndim != 3 or kernel.data.ndim != 3:
        raise ValueError(
            f"conv_h: expected 3-D input and kernel, got {x.shape} and {kernel.shape}"
        )
    c_in, h, w = x.shape
    c_out, kc, k = kernel.shape
    if kc != c_in:
        raise ValueError(f"conv_h: kernel expects {kc} input channels, input has {c_in}")
    if k % 2 == 0:
        raise ValueError(f"conv_h: kernel height must be odd, got {k}")
    pad = k // 2
    xp = np.zeros((c_in, h + 2 * pad, w))
    xp[:, pad:pad + h, :] = x.data

    out_data = np.zeros((c_out, h, w))
    kflat = kernel.data
    for t in range(k):
        win = xp[:, t:t + h, :].reshape(c_in, h * w)
        out_data += (kflat[:, :, t] @ win).reshape(c_out, h, w)
    parents: tuple = (x, kernel)
    if bias is not None:
        if bias.shape != (c_out,):
            raise ValueError(f"conv_h: expected bias ({c_out},), got {bias.shape}")
        out_data += bias.data[:, None, None]
        parents = (x, kernel, bias)

    def bwd(g):
        gf = g.reshape(c_out, h * w)
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(kernel.data)
        for t in range(k):
            win = xp[:, t:t + h, :].reshape(c_in, h * w)
            gk[:, :, t] = gf @ win.T
            gxp[:, t:t + h, :] += (kflat[:, :, t].T @ gf).reshape(c_in, h, w)
        kernel._accumulate(gk)
        x._accumulate(gxp[:, pad:pad + h, :])
        if bias is not None:
            bias._accumulate(g.sum(axis=(1, 2)))

    return Tensor(out_data, parents, bwd)


def _pool_view(x: Tensor, k: int, op: str) -> tuple[int, int, int]:
    if x.data.ndim != 3:
        raise ValueError(f"{op}: expected 3-D input, got shape {x.shape}")
    c, h, w = x.shape
    if k < 1 or h % k != 0:
        raise ValueError(f"{op}: window {k} must divide height {h}")
    return c, h, w


def maxpool_h(x: Tensor, k: int) -> Tensor:
    """Max pooling along height, window = stride = k."""
    c, h, w = _pool_view(x, k, "maxpool_h")
    blocks = x.data.reshape(c, h // k, k, w)
    arg = blocks.argmax(axis=2)

    def bwd(g):
        gx = np.zeros((c, h // k, k, w))
        np.put_along_axis(gx, arg[:, :, None, :], g[:, :, None, :], axis=2)
        x._accumulate(gx.reshape(c, h, w))

    return Tensor(blocks.max(axis=2), (x,), bwd)


def avgpool_h(x: Tensor, k: int) -> Tensor:
    """Average pooling along height, window = stride = k."""
    c, h, w = _pool_view(x, k, "avgpool_h")
    blocks = x.data.reshape(c, h // k, k, w)

    def bwd(g):
        gx = np.broadcast_to(g[:, :, None, :] / k, (c, h // k, k, w))
        x._accumulate(gx.reshape(c, h, w))

    return Tensor(blocks.mean(axis=2), (x,), bwd)


def upsample_w(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbor upsampling along the width axis."""
    if x.data.ndim != 3:
        raise ValueError(f"upsample_w: expected 3-D input, got shape {x.shape}")
    if factor < 1:
        raise ValueError(f"upsample_w: factor must be >= 1, got {factor}")
    c, h, w = x.shape

    def bwd(g):
        x._accumulate(g.reshape(c, h, w, factor).sum(axis=3))

    return Tensor(np.repeat(x.data, factor, axis=2), (x,), bwd)


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate feature maps along the channel axis."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat_channels: need at least one tensor")
    tail = tensors[0].shape[1:]
    for t in tensors:
        if t.data.ndim != 3 or t.shape[1:] != tail:
            raise ValueError(
                f"concat_channels: expected (*, {tail[0]}, {tail[1]}), got {t.shape}"
            )
    sizes = [t.shape[0] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t._accumulate(g[lo:hi])

    return Tensor(np.concatenate([t.data for t in tensors], axis=0), tuple(tensors), bwd)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    """View of channels [start, stop) as a new node."""
    if x.data.ndim != 3:
        raise ValueError(f"slice_channels: expected 3-D input, got shape {x.shape}")
    c = x.shape[0]
    if not 0 <= start < stop <= c:
        raise ValueError(f"slice_channels: invalid range [{start}, {stop}) for {c} channels")

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        x._accumulate(gx)

    return Tensor(x.data[start:stop].copy(), (x,), bwd)


def parameters_from_arrays(arrays: Iterable[np.ndarray]) -> list[Tensor]:
    return [Tensor(a) for a in arrays]
