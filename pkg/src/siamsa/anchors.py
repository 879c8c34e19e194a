"""Anchor grids and the (dx, dy, dw, dh) box parameterisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bbox import BBox
from .errors import InvalidInputError, ShapeError

# bound on |dw|, |dh| so exp() stays finite and anchors keep positive size
MAX_LOG_SCALE = 6.0


@dataclass(frozen=True)
class AnchorGeometry:
    """Where grid cells sit in the search patch and the base anchor side.

    Coordinates are continuous patch pixels: the patch spans
    ``[0, search_size]`` and the middle cell sits on ``search_size / 2``.
    """

    search_size: int
    stride: float
    base_size: float

    def centers(self, n):
        return self.search_size / 2.0 + (np.arange(n) - (n - 1) / 2.0) * self.stride


@dataclass(frozen=True, eq=False)
class AnchorField:
    """``anchors`` is ``(4, H, W)`` holding ``(cx, cy, w, h)`` in search-patch pixels."""

    anchors: np.ndarray
    features: object = None

    @property
    def grid_shape(self):
        return self.anchors.shape[1:]

    def box(self, i, j):
        cx, cy, w, h = self.anchors[:, i, j]
        return BBox.from_center(cx, cy, w, h)


def decode_offsets(offsets, base, stride, search_size):
    """Apply ``(dx, dy, dw, dh)`` to base boxes ``(4, H, W)`` of ``(cx, cy, w, h)``.

    Centres shift by ``(dx, dy) * stride`` and are clamped into the patch;
    sizes scale by ``exp(dw), exp(dh)`` with the exponent clamped to
    ``+-MAX_LOG_SCALE``.
    """
    offsets = np.asarray(offsets, dtype=np.float64)
    base = np.asarray(base, dtype=np.float64)
    if offsets.shape != base.shape or offsets.shape[0] != 4:
        raise ShapeError(f"offset grid {offsets.shape} does not match anchor grid {base.shape}")
    dw = np.clip(offsets[2], -MAX_LOG_SCALE, MAX_LOG_SCALE)
    dh = np.clip(offsets[3], -MAX_LOG_SCALE, MAX_LOG_SCALE)
    return np.stack(
        [
            np.clip(base[0] + offsets[0] * stride, 0.0, float(search_size)),
            np.clip(base[1] + offsets[1] * stride, 0.0, float(search_size)),
            base[2] * np.exp(dw),
            base[3] * np.exp(dh),
        ]
    )


def base_anchors(height, width, geometry: AnchorGeometry):
    """Square base box of side ``geometry.base_size`` centred on every cell."""
    if not geometry.base_size > 0:
        raise InvalidInputError(f"base anchor size must be positive, got {geometry.base_size}")
    gx, gy = np.meshgrid(geometry.centers(width), geometry.centers(height))
    side = np.full((height, width), float(geometry.base_size))
    return np.stack([gx, gy, side, side.copy()])
