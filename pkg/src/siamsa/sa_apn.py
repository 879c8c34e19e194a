"""Scale-aware anchor proposal: fuse shallow/deep correlation, regress anchors.

The fused map is ``R_d + lambda1 * A + lambda2 * P(concat(R_s, R_d))`` where
``A`` is the scale-channel cross-attention term (queries and keys from the
shallow correlation ``R_s``, values from the deep correlation ``R_d``) and
``P`` a 1x1 channel projection applied per scale slice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorField, AnchorGeometry, base_anchors, decode_offsets
from .errors import ShapeError
from .psa import ScaleProjection, cross_attention_map
from .se_backbone import ScaledTensor, collapse_scales, lift_to_scale_stack, se_dw_xcorr
from .tensor_core import ConvKernel, center_crop, conv2d, depthwise_xcorr, standardize


@dataclass(frozen=True, eq=False)
class FusionWeights:
    lambda1: float
    lambda2: float
    proj: ConvKernel  # 1x1, 2C -> C
    cross: ScaleProjection

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ShapeError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.proj.kh != 1 or self.proj.kw != 1 or self.proj.in_channels != 2 * self.proj.out_channels:
            raise ShapeError(
                f"fusion projection must be 1x1 mapping 2C->C, got "
                f"{self.proj.in_channels}->{self.proj.out_channels} {self.proj.kh}x{self.proj.kw}"
            )


@dataclass(frozen=True, eq=False)
class AGNWeights:
    hidden: ConvKernel
    out: ConvKernel

    def __post_init__(self):
        if self.out.out_channels != 4 or self.out.in_channels != self.hidden.out_channels:
            raise ShapeError("AGN output layer must map hidden channels to 4 offsets")


@dataclass(frozen=True, eq=False)
class APNOutput:
    f_apn: ScaledTensor
    anchors: AnchorField
    r_d: ScaledTensor
    r_s: ScaledTensor


def equalize_spatial(a: ScaledTensor, b: ScaledTensor):
    """Centre-crop the larger of two stacks so both share height and width."""
    h = min(a.shape[2], b.shape[2])
    w = min(a.shape[3], b.shape[3])
    return (
        a.replace(np.ascontiguousarray(center_crop(a.data, h, w))),
        b.replace(np.ascontiguousarray(center_crop(b.data, h, w))),
    )


def concat_project(r_s: ScaledTensor, r_d: ScaledTensor, proj: ConvKernel):
    stacked = np.concatenate([r_s.data, r_d.data], axis=0)
    out = [conv2d(stacked[:, s], proj, padding="same") for s in range(r_d.scales)]
    return np.stack(out, axis=1)


def fuse_apn_features(r_d: ScaledTensor, r_s: ScaledTensor, w: FusionWeights) -> ScaledTensor:
    if r_d.channels != r_s.channels or r_d.scales != r_s.scales:
        raise ShapeError(
            f"fuse_apn_features: (channel, scale) {r_d.shape[:2]} (deep) vs {r_s.shape[:2]} (shallow)"
        )
    if w.proj.out_channels != r_d.channels:
        raise ShapeError(
            f"fuse_apn_features: projection outputs {w.proj.out_channels} channels, maps have {r_d.channels}"
        )
    r_d, r_s = equalize_spatial(r_d, r_s)
    a_apn = cross_attention_map(r_s, r_d, w.cross)
    c_apn = concat_project(r_s, r_d, w.proj)
    return r_d.replace(r_d.data + w.lambda1 * a_apn + w.lambda2 * c_apn)


def agn_regress(f_apn: ScaledTensor, w: AGNWeights):
    """Two-layer anchor generation network; returns ``(4, H, W)`` offsets."""
    x = standardize(collapse_scales(f_apn))
    x = np.maximum(conv2d(x, w.hidden, padding="same"), 0.0)
    return conv2d(x, w.out, padding="same")


def agn_forward(f_apn: ScaledTensor, w: AGNWeights, geometry: AnchorGeometry) -> AnchorField:
    offsets = agn_regress(f_apn, w)
    base = base_anchors(f_apn.shape[2], f_apn.shape[3], geometry)
    return AnchorField(decode_offsets(offsets, base, geometry.stride, geometry.search_size), f_apn)


def shallow_correlation(x_phi4, z_phi4, dilations):
    """Depthwise correlation of layer-4 features, lifted to a scale stack after correlating."""
    return lift_to_scale_stack(depthwise_xcorr(x_phi4, z_phi4), dilations)


def sa_apn_forward(z_feats, x_feats, fusion: FusionWeights, agn: AGNWeights, geometry: AnchorGeometry):
    """``z_feats`` / ``x_feats`` are mappings with raw ``phi4`` and scale-stacked ``phi5``."""
    r_d = se_dw_xcorr(x_feats["phi5"], z_feats["phi5"])
    r_s = shallow_correlation(x_feats["phi4"], z_feats["phi4"], r_d.scale_dilations)
    f_apn = fuse_apn_features(r_d, r_s, fusion)
    return APNOutput(f_apn, agn_forward(f_apn, agn, geometry), r_d, r_s)
