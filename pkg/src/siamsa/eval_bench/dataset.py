"""Sequence directories and result files.

Layout of one sequence::

    <root>/<seq>/img/0001.png           (or .jpg)
    <root>/<seq>/groundtruth_rect.txt   x,y,w,h per line, 0-based pixels
    <root>/<seq>/attributes.txt         one tag per line
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..bbox import BBox, format_box, parse_box
from ..errors import DatasetError

ATTRIBUTES = ("ARC", "OV", "BC", "FM", "LI", "OB", "POC", "SV", "SOB", "VC", "UAM-A")
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
GT_FILE = "groundtruth_rect.txt"
ATTR_FILE = "attributes.txt"
IMG_DIR = "img"


@dataclass
class SequenceRecord:
    name: str
    frames: list
    ground_truth: list
    attributes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.frames) != len(self.ground_truth):
            raise DatasetError(
                f"{self.name}: {len(self.frames)} frames but {len(self.ground_truth)} annotation lines"
            )
        if not self.ground_truth or not self.ground_truth[0].area > 0:
            raise DatasetError(f"{self.name}: first ground-truth box must have positive area")
        unknown = set(self.attributes) - set(ATTRIBUTES)
        if unknown:
            raise DatasetError(f"{self.name}: unknown attribute tags {sorted(unknown)}")
        self.attributes = frozenset(self.attributes)

    def __len__(self):
        return len(self.frames)


def _frame_key(path):
    digits = re.findall(r"\d+", path.stem)
    return (int(digits[-1]) if digits else -1, path.name)


def read_boxes(path):
    boxes = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            boxes.append(parse_box(line.strip()))
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return boxes


def write_boxes(path, boxes):
    Path(path).write_text("".join(format_box(b) + "\n" for b in boxes))


def read_attributes(path):
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing {path}")
    tags = [t.strip() for t in path.read_text().splitlines() if t.strip()]
    unknown = [t for t in tags if t not in ATTRIBUTES]
    if unknown:
        raise DatasetError(f"{path}: unknown attribute tags {unknown}")
    return frozenset(tags)


def load_sequence(directory) -> SequenceRecord:
    directory = Path(directory)
    img_dir = directory / IMG_DIR
    gt_path = directory / GT_FILE
    if not img_dir.is_dir():
        raise DatasetError(f"{directory}: missing image folder '{IMG_DIR}'")
    if not gt_path.exists():
        raise DatasetError(f"{directory}: missing {GT_FILE}")
    frames = sorted(
        (p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES), key=_frame_key
    )
    boxes = read_boxes(gt_path)
    if len(frames) != len(boxes):
        raise DatasetError(
            f"{directory.name}: {len(frames)} frames but {len(boxes)} annotation lines"
        )
    return SequenceRecord(directory.name, frames, boxes, read_attributes(directory / ATTR_FILE))


def load_dataset(root):
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / GT_FILE).exists())
    if not dirs:
        raise DatasetError(f"no sequences found under {root}")
    return [load_sequence(d) for d in dirs]


def read_frame(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_sequence(root, name, frames, ground_truth, attributes):
    """Write frames as PNG plus annotation files; returns the loaded record."""
    seq_dir = Path(root) / name
    img_dir = seq_dir / IMG_DIR
    img_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames, start=1):
        Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(img_dir / f"{i:04d}.png")
    write_boxes(seq_dir / GT_FILE, ground_truth)
    (seq_dir / ATTR_FILE).write_text("".join(f"{t}\n" for t in sorted(attributes)))
    return load_sequence(seq_dir)
