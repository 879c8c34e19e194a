"""Dense array kernels: convolution, correlation, pooling and softmax.

Arrays are plain float64 ``numpy.ndarray`` objects whose axes follow a fixed
role order: ``(channel, height, width)`` for feature maps and
``(channel, scale, height, width)`` for scale stacks. Every public function
checks the axis count it expects and raises :class:`ShapeError` naming the
axis roles when the input does not fit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvariantViolation, ShapeError

CHW = ("channel", "height", "width")
CSHW = ("channel", "scale", "height", "width")


def expect_axes(x, roles, name="input"):
    """Return ``x`` as a float64 array, rejecting a wrong axis count."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != len(roles):
        raise ShapeError(
            f"{name}: expected axes ({', '.join(roles)}) but got shape {x.shape}"
        )
    if 0 in x.shape:
        raise ShapeError(f"{name}: empty axis in shape {x.shape} ({', '.join(roles)})")
    return x


def check_finite(x, where):
    if not np.all(np.isfinite(x)):
        raise InvariantViolation(f"{where}: non-finite values in output")
    return x


@dataclass(frozen=True, eq=False)
class ConvKernel:
    """Weights ``(out, in, kh, kw)``, bias ``(out,)`` and an integer dilation."""

    weights: np.ndarray
    bias: np.ndarray
    dilation: int = 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 4:
            raise ShapeError(
                f"kernel weights: expected axes (out_channel, in_channel, kh, kw), got {w.shape}"
            )
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if b.shape != (w.shape[0],):
            raise ShapeError(f"kernel bias: expected ({w.shape[0]},), got {b.shape}")
        if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
            raise ShapeError(f"kernel spatial size must be odd, got {w.shape[2]}x{w.shape[3]}")
        if int(self.dilation) != self.dilation or self.dilation < 1:
            raise ShapeError(f"dilation must be a positive integer, got {self.dilation}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ShapeError("kernel parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "dilation", int(self.dilation))

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kh(self):
        return self.weights.shape[2]

    @property
    def kw(self):
        return self.weights.shape[3]

    @property
    def extent(self):
        """Effective (height, width) footprint including dilation."""
        d = self.dilation
        return d * (self.kh - 1) + 1, d * (self.kw - 1) + 1

    def dilated(self, factor):
        return ConvKernel(self.weights, self.bias, self.dilation * int(factor))


def conv2d(x, k, padding="same", bias=True):
    """Cross-correlation of a ``(C_in, H, W)`` map with ``k`` (no kernel flip).

    ``padding="same"`` zero-pads so the output keeps ``H, W``; ``"valid"``
    keeps only placements fully inside the input.
    """
    x = expect_axes(x, CHW, "conv2d input")
    if x.shape[0] != k.in_channels:
        raise ShapeError(
            f"conv2d: channel axis is {x.shape[0]} but kernel expects {k.in_channels}"
        )
    eh, ew = k.extent
    d = k.dilation
    if padding == "same":
        ph, pw = (eh - 1) // 2, (ew - 1) // 2
        x = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    elif padding != "valid":
        raise ValueError(f"unknown padding {padding!r}")
    _, H, W = x.shape
    oh, ow = H - eh + 1, W - ew + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(
            f"conv2d: kernel extent {eh}x{ew} exceeds input height/width {H}x{W}"
        )
    out = np.zeros((k.out_channels, oh * ow))
    for i in range(k.kh):
        for j in range(k.kw):
            patch = x[:, i * d : i * d + oh, j * d : j * d + ow].reshape(x.shape[0], -1)
            out += k.weights[:, :, i, j] @ patch
    out = out.reshape(k.out_channels, oh, ow)
    if bias:
        out += k.bias[:, None, None]
    return check_finite(out, "conv2d")


def depthwise_xcorr(search, template):
    """Per-channel valid sliding inner product of ``template`` over ``search``."""
    search = expect_axes(search, CHW, "depthwise_xcorr search")
    template = expect_axes(template, CHW, "depthwise_xcorr template")
    C, H, W = search.shape
    c, h, w = template.shape
    if c != C:
        raise ShapeError(f"depthwise_xcorr: channel axis {C} (search) vs {c} (template)")
    if h > H or w > W:
        raise ShapeError(
            f"depthwise_xcorr: template height/width {h}x{w} larger than search {H}x{W}"
        )
    windows = sliding_window_view(search, (h, w), axis=(1, 2))
    out = np.einsum("cxyij,cij->cxy", windows, template)
    return check_finite(out, "depthwise_xcorr")


def global_pool(x, mode="avg"):
    """Pool a ``(C, S, H, W)`` stack over height and width, giving ``(C, S)``."""
    x = expect_axes(x, CSHW, "global_pool input")
    if mode == "avg":
        return x.mean(axis=(2, 3))
    if mode == "max":
        return x.max(axis=(2, 3))
    raise ValueError(f"unknown pooling mode {mode!r}")


def max_pool2d(x, size, stride):
    """Local max pooling of a ``(C, H, W)`` map, valid placements only."""
    x = expect_axes(x, CHW, "max_pool2d input")
    _, H, W = x.shape
    if size > H or size > W:
        raise ShapeError(f"max_pool2d: window {size} exceeds height/width {H}x{W}")
    oh, ow = (H - size) // stride + 1, (W - size) // stride + 1
    out = np.full((x.shape[0], oh, ow), -np.inf)
    for i in range(size):
        for j in range(size):
            np.maximum(
                out,
                x[:, i : i + (oh - 1) * stride + 1 : stride, j : j + (ow - 1) * stride + 1 : stride],
                out=out,
            )
    return out


def softmax(m, axis=-1):
    """Numerically safe softmax; rows along ``axis`` sum to one."""
    m = np.asarray(m, dtype=np.float64)
    z = np.exp(m - m.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def center_crop(x, height, width):
    """Crop the last two axes of ``x`` to ``height x width`` around the centre."""
    H, W = x.shape[-2:]
    if height > H or width > W:
        raise ShapeError(f"center_crop: {height}x{width} larger than {H}x{W}")
    top, left = (H - height) // 2, (W - width) // 2
    return x[..., top : top + height, left : left + width]


def standardize(x, eps=1e-6):
    """Per-channel zero mean / unit variance over space (parameter-free batch norm)."""
    x = expect_axes(x, CHW, "standardize input")
    mean = x.mean(axis=(1, 2), keepdims=True)
    std = x.std(axis=(1, 2), keepdims=True)
    return (x - mean) / (std + eps)
