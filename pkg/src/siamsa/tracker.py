"""End-to-end Siamese tracking loop.

Per frame: crop a search patch around the previous box, extract layer-4 and
scale-stacked layer-5 features, correlate them against the template, run the
scale-aware anchor proposal and pairwise attention blocks when enabled, apply
the classification/regression heads and pick a box with a cosine-window
penalty and size smoothing.

With both blocks disabled the pipeline is the plain baseline: SE depthwise
correlation of layer-5 features straight into the heads over a fixed anchor
grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import psa, sa_apn
from .anchors import AnchorField, AnchorGeometry, base_anchors, decode_offsets
from .bbox import BBox
from .config import TrackerConfig
from .errors import InvalidInputError, InvariantViolation, ShapeError
from .se_backbone import backbone_forward, collapse_scales, lift_to_scale_stack, se_conv, se_dw_xcorr
from .tensor_core import conv2d, softmax, standardize
from .weights import NetworkWeights

MIN_BOX_SIZE = 2.0


def crop_side(box: BBox, context):
    """Side of the square template crop (frame pixels) around ``box``."""
    return max(box.w, box.h) + context * (box.w + box.h) / 2.0


def _as_frame(frame):
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = np.repeat(frame[:, :, None], 3, axis=2)
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.shape[0] == 0 or frame.shape[1] == 0:
        raise InvalidInputError(f"frame must be a non-empty HxWx3 image, got shape {frame.shape}")
    return frame.astype(np.float64)


def crop_patch(frame, box: BBox, out_size, context, reference_size=127, pad_color=None):
    """Square bilinear crop centred on ``box``, returned as ``(3, out, out)``.

    The crop side is ``crop_side(box, context) * out_size / reference_size``;
    samples falling outside the frame take ``pad_color`` (default: the frame's
    per-channel mean).
    """
    img = _as_frame(frame)
    if not (box.w > 0 and box.h > 0) or not box.is_finite():
        raise InvalidInputError(f"cannot crop around degenerate box {box}")
    H, W, _ = img.shape
    pad = img.mean(axis=(0, 1)) if pad_color is None else np.asarray(pad_color, dtype=np.float64)
    side = crop_side(box, context) * out_size / reference_size
    # pixel (r, c) covers [c, c+1) x [r, r+1); its centre is at c + 0.5
    offsets = (np.arange(out_size) + 0.5) * side / out_size - side / 2.0 - 0.5
    xs = box.cx + offsets
    ys = box.cy + offsets

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]

    def gather(yi, xi):
        inside = (yi[:, None] >= 0) & (yi[:, None] < H) & (xi[None, :] >= 0) & (xi[None, :] < W)
        vals = img[np.clip(yi, 0, H - 1)[:, None], np.clip(xi, 0, W - 1)[None, :]]
        return np.where(inside[:, :, None], vals, pad)

    top = gather(y0, x0) * (1 - fx) + gather(y0, x0 + 1) * fx
    bottom = gather(y0 + 1, x0) * (1 - fx) + gather(y0 + 1, x0 + 1) * fx
    out = top * (1 - fy) + bottom * fy
    return np.ascontiguousarray(out.transpose(2, 0, 1))


@dataclass(frozen=True)
class CropGeometry:
    """Maps search-patch pixels back to the frame."""

    center_x: float
    center_y: float
    scale: float  # patch pixels per frame pixel
    search_size: int
    stride: float

    def to_frame(self, px, py):
        half = self.search_size / 2.0
        return self.center_x + (px - half) / self.scale, self.center_y + (py - half) / self.scale


@dataclass
class TrackerState:
    cfg: TrackerConfig
    weights: NetworkWeights
    template: dict
    box: BBox
    pad_color: np.ndarray
    frame_size: tuple  # (height, width)
    base_size: float  # base anchor side in search-patch pixels
    frames_seen: int = 1


def extract_features(patch, cfg: TrackerConfig, weights: NetworkWeights):
    """Backbone taps: raw ``phi4`` and scale-equivariant ``phi5`` stack."""
    feats = backbone_forward(patch / 255.0, cfg.backbone, weights.backbone)
    lifted = lift_to_scale_stack(feats["phi5"], cfg.scale_dilations)
    return {"phi4": feats["phi4"], "phi5": se_conv(lifted, weights.se_bank, cfg.inter_scale)}


def init(frame, box: BBox, cfg: TrackerConfig, weights: NetworkWeights | None = None) -> TrackerState:
    if weights is None:
        weights = NetworkWeights.init(cfg)
    weights.check_compatible(cfg)
    img = _as_frame(frame)
    if not (box.w > 0 and box.h > 0):
        raise InvalidInputError(f"initial box must have positive area, got {box}")
    pad = img.mean(axis=(0, 1))
    z = crop_patch(img, box, cfg.template_size, cfg.context_margin, cfg.template_size, pad)
    template = extract_features(z, cfg, weights)
    base = np.sqrt(box.w * box.h) * cfg.template_size / crop_side(box, cfg.context_margin)
    return TrackerState(cfg, weights, template, box, pad, img.shape[:2], float(base))


def cosine_window(height, width):
    return np.outer(np.hanning(height), np.hanning(width))


def select_cell(scores, window_influence):
    """Index of the best cell after weighting scores by ``window ** influence``."""
    penalised = scores * cosine_window(*scores.shape) ** window_influence
    i, j = np.unravel_index(int(np.argmax(penalised)), scores.shape)
    return int(i), int(j)


def decode_and_select(cls, reg, anchors: AnchorField, prev: BBox, cfg: TrackerConfig, geometry: CropGeometry):
    """Pick the best refined anchor and smooth its size toward ``prev``.

    Returns the box in frame coordinates and its foreground probability.
    """
    cls = np.asarray(cls, dtype=np.float64)
    reg = np.asarray(reg, dtype=np.float64)
    grid = anchors.grid_shape
    if cls.shape != (2, *grid) or reg.shape != (4, *grid):
        raise ShapeError(
            f"decode_and_select: cls {cls.shape} / reg {reg.shape} do not match anchor grid {grid}"
        )
    fg = softmax(cls, axis=0)[1]
    i, j = select_cell(fg, cfg.window_influence)
    cand = decode_offsets(reg[:, i : i + 1, j : j + 1], anchors.anchors[:, i : i + 1, j : j + 1],
                          geometry.stride, geometry.search_size)[:, 0, 0]
    cx, cy = geometry.to_frame(cand[0], cand[1])
    s = cfg.size_smoothing
    w = s * prev.w + (1.0 - s) * cand[2] / geometry.scale
    h = s * prev.h + (1.0 - s) * cand[3] / geometry.scale
    return BBox.from_center(cx, cy, w, h), float(fg[i, j])


def clamp_to_frame(box: BBox, frame_size):
    H, W = frame_size
    w = float(np.clip(box.w, min(MIN_BOX_SIZE, W), W))
    h = float(np.clip(box.h, min(MIN_BOX_SIZE, H), H))
    x = float(np.clip(box.cx - w / 2.0, 0.0, W - w))
    y = float(np.clip(box.cy - h / 2.0, 0.0, H - h))
    return BBox(x, y, w, h)


def heads(refined, weights: NetworkWeights):
    x = standardize(collapse_scales(refined))
    return conv2d(x, weights.cls_head, "same"), conv2d(x, weights.reg_head, "same")


def network_forward(template, search, cfg: TrackerConfig, weights: NetworkWeights, geometry: AnchorGeometry):
    """Correlation, optional SA-APN / PSAN, heads. Returns ``(cls, reg, anchors)``."""
    if cfg.enable_sa_apn:
        apn = sa_apn.sa_apn_forward(template, search, weights.fusion, weights.agn, geometry)
        r_d, f_apn, anchors = apn.r_d, apn.f_apn, apn.anchors
    else:
        r_d = se_dw_xcorr(search["phi5"], template["phi5"])
        f_apn = r_d
        anchors = AnchorField(base_anchors(r_d.shape[2], r_d.shape[3], geometry), r_d)
    refined = psa.psan_forward(r_d, f_apn, weights.attention) if cfg.enable_psan else f_apn
    cls, reg = heads(refined, weights)
    return cls, reg, anchors


def track_frame(state: TrackerState, frame):
    if state is None or not isinstance(state, TrackerState):
        raise InvalidInputError("track_frame needs a state returned by init()")
    cfg = state.cfg
    img = _as_frame(frame)
    prev = state.box
    side_x = crop_side(prev, cfg.context_margin) * cfg.search_size / cfg.template_size
    x = crop_patch(img, prev, cfg.search_size, cfg.context_margin, cfg.template_size, state.pad_color)
    search = extract_features(x, cfg, state.weights)
    anchor_geo = AnchorGeometry(cfg.search_size, float(cfg.backbone.total_stride), state.base_size)
    cls, reg, anchors = network_forward(state.template, search, cfg, state.weights, anchor_geo)
    crop_geo = CropGeometry(prev.cx, prev.cy, cfg.search_size / side_x, cfg.search_size,
                            anchor_geo.stride)
    box, score = decode_and_select(cls, reg, anchors, prev, cfg, crop_geo)
    box = clamp_to_frame(box, img.shape[:2])
    if not (box.is_finite() and box.w > 0 and box.h > 0) or not 0.0 <= score <= 1.0:
        raise InvariantViolation(f"tracker produced invalid output {box}, score {score}")
    state.box = box
    state.frame_size = img.shape[:2]
    state.frames_seen += 1
    return box, score


class SiamSATracker:
    """Object wrapper over :func:`init` / :func:`track_frame` for evaluation loops."""

    def __init__(self, cfg: TrackerConfig | None = None, weights: NetworkWeights | None = None):
        self.cfg = cfg or TrackerConfig()
        self.weights = weights if weights is not None else NetworkWeights.init(self.cfg)
        self.state = None

    def init(self, frame, box: BBox):
        self.state = init(frame, box, self.cfg, self.weights)

    def track(self, frame):
        return track_frame(self.state, frame)


class StaticTracker:
    """Baseline that keeps reporting the initial box."""

    def init(self, frame, box: BBox):
        self.box = box

    def track(self, frame):
        return self.box, 1.0
