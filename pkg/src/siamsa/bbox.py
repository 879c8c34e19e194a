from __future__ import annotations

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left ``(x, y)`` and extent ``(w, h)`` in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.w < 0 or self.h < 0:
            raise ValueError(f"box extents must be non-negative, got w={self.w}, h={self.h}")

    @classmethod
    def from_center(cls, cx, cy, w, h):
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def cx(self):
        return self.x + self.w / 2.0

    @property
    def cy(self):
        return self.y + self.h / 2.0

    @property
    def area(self):
        return self.w * self.h

    def is_finite(self):
        return all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h))

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


def format_number(v):
    """Shortest round-trip text for a float; integral values print without '.0'."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_box(box):
    return ",".join(format_number(v) for v in box.as_tuple())


def parse_box(line):
    parts = [p for p in line.replace("\t", ",").replace(" ", ",").split(",") if p]
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated values, got {line!r}")
    return BBox(*(float(p) for p in parts))
