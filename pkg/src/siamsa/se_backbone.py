"""Feature extractor and scale-axis machinery.

A scale stack holds one feature map per integer kernel dilation. Dilation 1
is always index 0. Scale-equivariant convolution convolves every slice with
the kernel dilated by that slice's factor, optionally summing over a window
of neighbouring input slices with one kernel per relative offset.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError, ShapeError
from .tensor_core import (
    CHW,
    CSHW,
    ConvKernel,
    check_finite,
    conv2d,
    depthwise_xcorr,
    expect_axes,
    max_pool2d,
)

DEFAULT_DILATIONS = (1, 2, 3)

# normalized 3x3 binomial smoothing used to create the scale axis
BINOMIAL_3x3 = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0


@dataclass(frozen=True, eq=False)
class ScaledTensor:
    data: np.ndarray
    scale_dilations: tuple

    def __post_init__(self):
        data = expect_axes(self.data, CSHW, "ScaledTensor")
        dil = tuple(int(d) for d in self.scale_dilations)
        if len(dil) != data.shape[1]:
            raise ShapeError(
                f"ScaledTensor: scale axis has {data.shape[1]} slices but "
                f"{len(dil)} dilations were given"
            )
        validate_dilations(dil)
        check_finite(data, "ScaledTensor")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "scale_dilations", dil)

    @property
    def shape(self):
        return self.data.shape

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def scales(self):
        return self.data.shape[1]

    def replace(self, data):
        return ScaledTensor(data, self.scale_dilations)


def validate_dilations(dilations):
    if len(dilations) == 0 or dilations[0] != 1:
        raise InvalidInputError(f"scale dilations must start at 1, got {list(dilations)}")
    if any(b <= a for a, b in zip(dilations, dilations[1:])):
        raise InvalidInputError(f"scale dilations must strictly increase, got {list(dilations)}")


@dataclass(frozen=True)
class LayerSpec:
    out_channels: int
    kernel: int = 3
    pool: int = 1  # max-pool window and stride after the activation; 1 = none
    relu: bool = True


def _default_layers():
    return (
        LayerSpec(8, 3, pool=2),
        LayerSpec(16, 3, pool=2),
        LayerSpec(16, 3),
        LayerSpec(16, 3),
        LayerSpec(16, 3, relu=False),
    )


@dataclass(frozen=True)
class BackboneConfig:
    """Lightweight five-layer AlexNet-like stand-in with taps at layers 4 and 5."""

    layers: tuple = field(default_factory=_default_layers)
    in_channels: int = 3
    template_size: int = 127
    search_size: int = 287
    tap_layers: tuple = (4, 5)
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.layers) != 5:
            raise InvalidInputError(f"backbone needs exactly 5 layers, got {len(self.layers)}")
        if tuple(self.tap_layers) != (4, 5):
            raise InvalidInputError(f"tap layers must be (4, 5), got {self.tap_layers}")
        if (self.search_size - self.template_size) % self.total_stride:
            raise InvalidInputError(
                f"total stride {self.total_stride} does not divide "
                f"{self.search_size} - {self.template_size}"
            )
        for p in (self.template_size, self.search_size):
            self.feature_sizes(p)

    @property
    def total_stride(self):
        return int(np.prod([spec.pool for spec in self.layers]))

    @property
    def channels(self):
        return self.layers[-1].out_channels

    def feature_sizes(self, patch_size):
        """Spatial extents after every layer, computed from the layer arithmetic."""
        sizes = []
        n = patch_size
        for spec in self.layers:
            n = n - spec.kernel + 1
            if spec.pool > 1:
                n = (n - spec.pool) // spec.pool + 1
            if n <= 0:
                raise InvalidInputError(f"patch size {patch_size} too small for backbone")
            sizes.append(n)
        return sizes


def init_backbone(cfg, rng=None):
    """He-initialised conv kernels with zero bias, seeded by ``cfg.rng_seed``."""
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    kernels = []
    cin = cfg.in_channels
    for spec in cfg.layers:
        fan_in = cin * spec.kernel * spec.kernel
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (spec.out_channels, cin, spec.kernel, spec.kernel))
        kernels.append(ConvKernel(w, np.zeros(spec.out_channels)))
        cin = spec.out_channels
    return kernels


@lru_cache(maxsize=8)
def _seeded_backbone(cfg):
    return tuple(init_backbone(cfg))


def backbone_forward(image_patch, cfg, kernels=None):
    """Run the stack on a ``(3, P, P)`` patch; returns ``{"phi4": ..., "phi5": ...}``."""
    x = expect_axes(image_patch, CHW, "backbone input")
    if x.shape[0] != cfg.in_channels:
        raise ShapeError(f"backbone: channel axis {x.shape[0]}, expected {cfg.in_channels}")
    if x.shape[1] != x.shape[2] or x.shape[1] not in (cfg.template_size, cfg.search_size):
        raise InvalidInputError(
            f"backbone: patch {x.shape[1]}x{x.shape[2]} does not match configured sizes "
            f"{cfg.template_size} / {cfg.search_size}"
        )
    if kernels is None:
        kernels = _seeded_backbone(cfg)
    taps = {}
    for index, (spec, k) in enumerate(zip(cfg.layers, kernels), start=1):
        x = conv2d(x, k, padding="valid")
        if spec.relu:
            x = np.maximum(x, 0.0)
        if spec.pool > 1:
            x = max_pool2d(x, spec.pool, spec.pool)
        if index in cfg.tap_layers:
            taps[f"phi{index}"] = x
    return taps


def lift_to_scale_stack(f, scales=DEFAULT_DILATIONS):
    """Add a scale axis: slice ``s`` is ``f`` smoothed by the binomial kernel
    dilated by ``scales[s]``; slice 0 is ``f`` itself.

    Borders are edge-replicated so constant maps stay constant on every slice.
    """
    f = expect_axes(f, CHW, "lift_to_scale_stack input")
    scales = tuple(int(s) for s in scales)
    validate_dilations(scales)
    C, H, W = f.shape
    slices = [f.copy()]
    for d in scales[1:]:
        padded = np.pad(f, ((0, 0), (d, d), (d, d)), mode="edge")
        out = np.zeros_like(f)
        for i in range(3):
            for j in range(3):
                out += BINOMIAL_3x3[i, j] * padded[:, i * d : i * d + H, j * d : j * d + W]
        slices.append(out)
    return ScaledTensor(np.stack(slices, axis=1), scales)


def se_conv(x, bank, inter_scale=1, padding="same"):
    """Scale-equivariant convolution over a scale stack.

    ``bank`` holds one kernel per relative scale offset in the window
    (``inter_scale`` kernels, centre kernel in the middle); a single
    :class:`ConvKernel` is accepted when ``inter_scale == 1``. Output slice
    ``s`` sums ``conv2d(x[s'], bank[s' - s], dilated by scale_dilations[s])``
    over input slices ``s'`` in the window, truncated at the stack ends. Only
    the centre kernel's bias is added, once per output slice.
    """
    if isinstance(bank, ConvKernel):
        bank = [bank]
    bank = list(bank)
    S = x.scales
    if inter_scale % 2 == 0 or inter_scale < 1 or inter_scale > S:
        raise InvalidInputError(f"inter_scale must be odd and <= {S}, got {inter_scale}")
    if len(bank) != inter_scale:
        raise ShapeError(f"se_conv: bank has {len(bank)} kernels, window is {inter_scale}")
    half = inter_scale // 2
    centre = bank[half]
    for k in bank:
        if k.in_channels != x.channels or k.out_channels != centre.out_channels:
            raise ShapeError(
                f"se_conv: kernel maps {k.in_channels}->{k.out_channels} channels, "
                f"input has {x.channels}"
            )
    outputs = []
    for s, d in enumerate(x.scale_dilations):
        acc = None
        for offset in range(-half, half + 1):
            sp = s + offset
            if sp < 0 or sp >= S:
                continue
            term = conv2d(x.data[:, sp], bank[offset + half].dilated(d), padding, bias=False)
            acc = term if acc is None else acc + term
        outputs.append(acc + centre.bias[:, None, None])
    return ScaledTensor(np.stack(outputs, axis=1), x.scale_dilations)


def se_dw_xcorr(search, template):
    """Depthwise correlation carried out independently on each scale slice."""
    if search.channels != template.channels:
        raise ShapeError(
            f"se_dw_xcorr: channel axis {search.channels} (search) vs {template.channels} (template)"
        )
    if search.scales != template.scales:
        raise ShapeError(
            f"se_dw_xcorr: scale axis {search.scales} (search) vs {template.scales} (template)"
        )
    if search.scale_dilations != template.scale_dilations:
        raise ShapeError(
            f"se_dw_xcorr: scale dilations {search.scale_dilations} vs {template.scale_dilations}"
        )
    out = [
        depthwise_xcorr(search.data[:, s], template.data[:, s]) for s in range(search.scales)
    ]
    return ScaledTensor(np.stack(out, axis=1), search.scale_dilations)


def collapse_scales(x: ScaledTensor):
    """Max over the scale axis, giving a ``(C, H, W)`` map."""
    return x.data.max(axis=1)
