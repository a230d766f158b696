"""Pixel-exact mask rasterization, overlap ratios, and mask codecs.

Areas are integer pixel counts over rasterized boxes, not analytic box
areas: union semantics differ when boxes overlap, and every downstream
ratio is defined on the rasters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import ObjectAnnotation
from .errors import DimensionMismatchError, EmptyDenominatorError, ParseError


def round_half_up(v: float) -> int:
    """0.5 always rounds away from zero toward +inf (box-corner convention)."""
    return math.floor(v + 0.5)


@dataclass
class MaskRaster:
    """Boolean (height, width) grid, True = removed pixel."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.dtype != bool or self.data.ndim != 2:
            raise DimensionMismatchError("mask must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def area(self) -> int:
        return int(self.data.sum())

    def union(self, other: "MaskRaster") -> "MaskRaster":
        self._check_dims(other)
        return MaskRaster(self.data | other.data)

    def _check_dims(self, other: "MaskRaster") -> None:
        if self.data.shape != other.data.shape:
            raise DimensionMismatchError(
                f"mask shapes differ: {self.data.shape} vs {other.data.shape}")

    def __eq__(self, other) -> bool:
        return (isinstance(other, MaskRaster)
                and self.data.shape == other.data.shape
                and bool(np.array_equal(self.data, other.data)))

    @classmethod
    def empty(cls, width: int, height: int) -> "MaskRaster":
        return cls(np.zeros((height, width), dtype=bool))


def rasterize_box(x: float, y: float, w: float, h: float,
                  width: int, height: int) -> np.ndarray:
    """Pixel (i, j) is covered iff x <= j < x+w and y <= i < y+h after
    rounding the box corners half-up to integers."""
    x0 = max(round_half_up(x), 0)
    y0 = max(round_half_up(y), 0)
    x1 = min(round_half_up(x + w), width)
    y1 = min(round_half_up(y + h), height)
    grid = np.zeros((height, width), dtype=bool)
    if x1 > x0 and y1 > y0:
        grid[y0:y1, x0:x1] = True
    return grid


def union_mask(objects: list[ObjectAnnotation], class_filter: set[int],
               dims: tuple[int, int]) -> MaskRaster:
    """Union of the boxes of all objects whose class is in the filter.

    ``dims`` is (width, height) of the owning image.
    """
    width, height = dims
    grid = np.zeros((height, width), dtype=bool)
    for obj in objects:
        if obj.class_id in class_filter:
            b = obj.bbox
            grid |= rasterize_box(b.x, b.y, b.w, b.h, width, height)
    return MaskRaster(grid)


def overlap_ratio(mask_a: MaskRaster, mask_b: MaskRaster) -> float:
    """area(A intersect B) / area(B), exact integer counts."""
    mask_a._check_dims(mask_b)
    denom = mask_b.area()
    if denom == 0:
        raise EmptyDenominatorError("overlap ratio against an empty mask")
    inter = int((mask_a.data & mask_b.data).sum())
    return inter / denom


def mask_to_rle(mask: MaskRaster) -> dict:
    """Uncompressed COCO-convention RLE: column-major runs, first run
    counts zeros. Returns ``{"size": [h, w], "counts": [...]}``."""
    flat = mask.data.flatten(order="F")
    counts: list[int] = []
    current = False
    run = 0
    for v in flat:
        if bool(v) == current:
            run += 1
        else:
            counts.append(run)
            current = bool(v)
            run = 1
    counts.append(run)
    if not counts:
        counts = [0]
    return {"size": [mask.height, mask.width], "counts": counts}


def rle_to_mask(rle: dict) -> MaskRaster:
    try:
        h, w = rle["size"]
        counts = rle["counts"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed RLE object: {exc}") from exc
    total = sum(counts)
    if total != h * w:
        raise ParseError(f"RLE counts sum {total} != {h}*{w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if run:
            flat[pos:pos + run] = value
        pos += run
        value = not value
    return MaskRaster(flat.reshape((h, w), order="F"))


def write_mask_png(mask: MaskRaster, path: str | Path) -> None:
    """8-bit grayscale PNG, removed = 255, kept = 0."""
    arr = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_mask_png(path: str | Path) -> MaskRaster:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return MaskRaster(arr >= 128)


def write_mask_rle(mask: MaskRaster, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mask_to_rle(mask), fh, sort_keys=True)


def read_mask_rle(path: str | Path) -> MaskRaster:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return rle_to_mask(json.load(fh))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
