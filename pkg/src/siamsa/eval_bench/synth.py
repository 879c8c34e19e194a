"""Procedural tracking sequences with exact ground truth.

A textured rectangle moves over a value-noise background. Its centre follows
``c0 + v * t + wobble`` and its area grows geometrically so the last frame
has ``area_growth`` times the first frame's area, which emulates a camera
approaching the object. The object's texture is sampled in object-relative
coordinates, so it zooms with the box.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..bbox import BBox
from ..errors import InvalidInputError
from .dataset import SequenceRecord, write_sequence
from .metrics import has_scale_variation

BACKGROUND_CELL = 16
OBJECT_CELLS = 6
FAST_MOTION_PX = 20.0
OCCLUDER_GRAY = 128


@dataclass(frozen=True)
class SynthSpec:
    name: str = "synth"
    n_frames: int = 20
    frame_width: int = 320
    frame_height: int = 240
    box: tuple = (140.0, 100.0, 40.0, 40.0)
    velocity: tuple = (0.0, 0.0)
    wobble: float = 0.0
    wobble_period: float = 20.0
    area_growth: float = 1.0
    aspect_growth: float = 1.0
    occlusion: tuple | None = None  # (start_frame, end_frame, covered fraction of width)

    def __post_init__(self):
        if self.n_frames < 1:
            raise InvalidInputError(f"{self.name}: n_frames must be positive")
        if self.frame_width < 1 or self.frame_height < 1:
            raise InvalidInputError(f"{self.name}: frame size must be positive")
        x, y, w, h = (float(v) for v in self.box)
        if not (w > 0 and h > 0):
            raise InvalidInputError(f"{self.name}: object size must be positive")
        if x < 0 or y < 0 or x + w > self.frame_width or y + h > self.frame_height:
            raise InvalidInputError(
                f"{self.name}: initial box {self.box} exceeds the "
                f"{self.frame_width}x{self.frame_height} frame"
            )
        if not (self.area_growth > 0 and self.aspect_growth > 0):
            raise InvalidInputError(f"{self.name}: growth factors must be positive")
        object.__setattr__(self, "box", (x, y, w, h))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        if self.occlusion is not None:
            start, end, frac = self.occlusion
            object.__setattr__(self, "occlusion", (int(start), int(end), float(frac)))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"seed"}
        if unknown:
            raise InvalidInputError(f"unknown synth spec keys {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in known})


def trajectory(spec: SynthSpec):
    x0, y0, w0, h0 = spec.box
    cx0, cy0 = x0 + w0 / 2.0, y0 + h0 / 2.0
    n = spec.n_frames
    boxes = []
    for t in range(n):
        tau = t / (n - 1) if n > 1 else 0.0
        area = spec.area_growth ** tau
        aspect = spec.aspect_growth ** tau
        w = w0 * math.sqrt(area * aspect)
        h = h0 * math.sqrt(area / aspect)
        phase = 2.0 * math.pi * t / spec.wobble_period
        cx = cx0 + spec.velocity[0] * t + spec.wobble * math.sin(phase)
        cy = cy0 + spec.velocity[1] * t + spec.wobble * (1.0 - math.cos(phase))
        boxes.append(BBox.from_center(cx, cy, w, h))
    return boxes


def value_noise(rng, height, width, cell, channels=3):
    gh, gw = height // cell + 2, width // cell + 2
    grid = rng.random((gh, gw, channels))
    ys = (np.arange(height) + 0.5) / cell
    xs = (np.arange(width) + 0.5) / cell
    y0, x0 = ys.astype(int), xs.astype(int)
    fy, fx = (ys - y0)[:, None, None], (xs - x0)[None, :, None]
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x0 + 1] * fx
    bottom = grid[y0 + 1][:, x0] * (1 - fx) + grid[y0 + 1][:, x0 + 1] * fx
    return top * (1 - fy) + bottom * fy


def render_frame(background, texture, box: BBox, occluded_fraction=0.0):
    frame = background.copy()
    H, W, _ = frame.shape
    px = np.arange(W) + 0.5
    py = np.arange(H) + 0.5
    u = (px - box.x) / box.w
    v = (py - box.y) / box.h
    cols = np.nonzero((u >= 0) & (u < 1))[0]
    rows = np.nonzero((v >= 0) & (v < 1))[0]
    if cols.size and rows.size:
        tu = np.minimum((u[cols] * OBJECT_CELLS).astype(int), OBJECT_CELLS - 1)
        tv = np.minimum((v[rows] * OBJECT_CELLS).astype(int), OBJECT_CELLS - 1)
        frame[np.ix_(rows, cols)] = texture[np.ix_(tv, tu)]
        if occluded_fraction > 0:
            covered = cols[u[cols] < occluded_fraction]
            frame[np.ix_(rows, covered)] = OCCLUDER_GRAY
    return frame


def derive_attributes(spec: SynthSpec, boxes):
    tags = set()
    if has_scale_variation(boxes):
        tags.add("SV")
    ar0 = boxes[0].w / boxes[0].h
    if any(abs(math.log2((b.w / b.h) / ar0)) > 1.0 for b in boxes):
        tags.add("ARC")
    if any(
        math.hypot(b.cx - a.cx, b.cy - a.cy) > FAST_MOTION_PX for a, b in zip(boxes, boxes[1:])
    ):
        tags.add("FM")
    if any(
        b.x < 0 or b.y < 0 or b.x + b.w > spec.frame_width or b.y + b.h > spec.frame_height
        for b in boxes
    ):
        tags.add("OV")
    if spec.occlusion is not None:
        start, end, frac = spec.occlusion
        if frac > 0 and max(start, 0) < min(end, spec.n_frames):
            tags.add("POC")
    return frozenset(tags)


def synth_sequence(spec: SynthSpec, seed=0):
    """Render ``spec``; returns ``(SequenceRecord, frames)`` with in-memory frames.

    The record's frame entries are the file names the frames get on disk.
    """
    rng = np.random.default_rng(seed)
    background = (40 + 160 * value_noise(rng, spec.frame_height, spec.frame_width, BACKGROUND_CELL)).astype(np.uint8)
    texture = (rng.integers(0, 2, (OBJECT_CELLS, OBJECT_CELLS, 1)) * 200 + rng.integers(0, 56, (OBJECT_CELLS, OBJECT_CELLS, 3))).astype(np.uint8)
    boxes = trajectory(spec)
    frames = []
    for t, box in enumerate(boxes):
        frac = 0.0
        if spec.occlusion is not None and spec.occlusion[0] <= t < spec.occlusion[1]:
            frac = spec.occlusion[2]
        frames.append(render_frame(background, texture, box, frac))
    names = [f"{i:04d}.png" for i in range(1, len(frames) + 1)]
    record = SequenceRecord(spec.name, names, boxes, derive_attributes(spec, boxes))
    return record, frames


def load_synth_specs(path):
    """Read a JSON spec file: one spec object, a list of them, or ``{"sequences": [...]}``."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(data, dict) and "sequences" in data:
        data = data["sequences"]
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not all(isinstance(d, dict) for d in data):
        raise InvalidInputError(f"{path}: expected a spec object or a list of them")
    return data


def generate_dataset(spec_dicts, out_root, seed=0):
    """Render and write every spec; sequence ``i`` uses ``seed`` mixed with ``i``
    unless the spec carries its own ``seed``."""
    records = []
    names = set()
    for index, d in enumerate(spec_dicts):
        spec = SynthSpec.from_dict(d)
        if spec.name in names:
            raise InvalidInputError(f"duplicate sequence name {spec.name!r}")
        names.add(spec.name)
        seq_seed = d.get("seed", [seed, index])
        record, frames = synth_sequence(spec, seq_seed)
        records.append(
            write_sequence(out_root, spec.name, frames, record.ground_truth, record.attributes)
        )
    return records
