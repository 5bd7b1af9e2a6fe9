"""Rectangles and the sliding-window grid."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

CANVAS = 64

# (width, height) templates used for the sliding sub-window search.
DEFAULT_SCALES = (
    (64, 24), (24, 64), (32, 32), (16, 16), (24, 24),
    (16, 48), (48, 16), (64, 32), (32, 64),
)
DEFAULT_STRIDE = 4


class Rect(NamedTuple):
    """Axis-aligned pixel rectangle, inclusive on all four sides."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return max(0, self.width) * max(0, self.height)

    def intersection(self, other: "Rect") -> int:
        w = min(self.x1, other.x1) - max(self.x0, other.x0) + 1
        h = min(self.y1, other.y1) - max(self.y0, other.y0) + 1
        return max(0, w) * max(0, h)

    def iou(self, other: "Rect") -> float:
        inter = self.intersection(other)
        union = self.area + other.area - inter
        return inter / union if union else 0.0

    def contains_point(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def dilate(self, r: int) -> "Rect":
        return Rect(self.x0 - r, self.y0 - r, self.x1 + r, self.y1 + r)

    def within(self, width: int, height: int) -> bool:
        return 0 <= self.x0 <= self.x1 < width and 0 <= self.y0 <= self.y1 < height


@dataclass(frozen=True)
class WindowGrid:
    scales: tuple = DEFAULT_SCALES
    stride: int = DEFAULT_STRIDE
    size: int = CANVAS

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(tuple(int(v) for v in s) for s in self.scales))
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        for w, h in self.scales:
            if not (1 <= w <= self.size and 1 <= h <= self.size):
                raise ValueError(f"scale {(w, h)} does not fit a {self.size}x{self.size} canvas")

    def spec_string(self) -> str:
        scales = ";".join(f"{w}x{h}" for w, h in self.scales)
        return f"size={self.size},stride={self.stride},scales={scales}"

    @classmethod
    def from_spec_string(cls, text: str) -> "WindowGrid":
        fields = dict(part.split("=", 1) for part in text.split(","))
        scales = tuple(tuple(int(v) for v in s.split("x")) for s in fields["scales"].split(";"))
        return cls(scales=scales, stride=int(fields["stride"]), size=int(fields["size"]))


def enumerate_windows(grid: WindowGrid) -> list[Rect]:
    """All placements of every scale at stride offsets.

    Order is scale index, then y, then x, all ascending.
    """
    rects = []
    for w, h in grid.scales:
        for y in range(0, grid.size - h + 1, grid.stride):
            for x in range(0, grid.size - w + 1, grid.stride):
                rects.append(Rect(x, y, x + w - 1, y + h - 1))
    return rects


def rects_array(rects) -> np.ndarray:
    return np.asarray([tuple(r) for r in rects], dtype=np.int64).reshape(-1, 4)
