"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the definitions, with no
imports from the package's planner/metrics internals beyond plain data
types, so a bug in the production code cannot hide in its own oracle.
"""

from __future__ import annotations

import math

import numpy as np


def oracle_rasterize(x: float, y: float, w: float, h: float,
                     width: int, height: int) -> np.ndarray:
    """Membership-test rasterization: a pixel grid compared against the
    half-up-rounded box bounds, no slice assignment."""
    x0 = math.floor(x + 0.5)
    y0 = math.floor(y + 0.5)
    x1 = math.floor(x + w + 0.5)
    y1 = math.floor(y + h + 0.5)
    jj, ii = np.meshgrid(np.arange(width), np.arange(height))
    return (jj >= x0) & (jj < x1) & (ii >= y0) & (ii < y1)


def oracle_union(boxes, width: int, height: int) -> np.ndarray:
    grid = np.zeros((height, width), dtype=bool)
    for (x, y, w, h) in boxes:
        grid = grid | oracle_rasterize(x, y, w, h, width, height)
    return grid


def oracle_plan(boxes_by_class: dict[int, list[tuple]], width: int, height: int,
                trigger: int, alpha1: float = 0.4, alpha2: float = 0.8,
                alpha3: float = 0.7, class_masks: dict[int, np.ndarray] | None = None):
    """Straight-line transcription of the removal-decision pseudo-code.

    Returns None or (kind, removed_set, mask) with kind in
    {"single", "multi"}. Mirrors the published listing step for step:
    oversize check on the trigger mask first, then the all-below-alpha1
    branch, then the any-above-alpha2 branch, else nothing.

    ``class_masks`` may carry per-class unions precomputed with
    ``oracle_union`` so a sweep over every trigger of one scene does not
    re-rasterize the scene per trigger; the decision logic is unchanged.
    """
    if class_masks is None:
        class_masks = {g: oracle_union(boxes, width, height)
                       for g, boxes in boxes_by_class.items()}
    mask_q = class_masks[trigger]
    if mask_q.sum() / (width * height) > alpha3:
        return None

    ratios = {}
    for g in boxes_by_class:
        if g == trigger:
            continue
        mask_g = class_masks[g]
        ratios[g] = (mask_q & mask_g).sum() / mask_g.sum()

    if all(r < alpha1 for r in ratios.values()):
        return ("single", {trigger}, mask_q)

    if any(r > alpha2 for r in ratios.values()):
        removed = {trigger} | {g for g, r in ratios.items() if r > alpha2}
        if not (set(boxes_by_class) - removed):
            return None
        mask = mask_q.copy()
        for g in removed - {trigger}:
            mask = mask | class_masks[g]
        return ("multi", removed, mask)

    return None


def random_scene(rng) -> tuple[dict[int, list[tuple]], int, int]:
    """Seeded random image layout: 2-6 classes, 1-4 boxes each, image
    dims from 64x64 up to 640x480. Boxes may be fractional, overlap, and
    touch the borders."""
    width = int(rng.integers(64, 641))
    height = int(rng.integers(64, 481))
    n_classes = int(rng.integers(2, 7))
    boxes_by_class = {}
    for class_id in range(n_classes):
        boxes = []
        for _ in range(int(rng.integers(1, 5))):
            w = float(rng.uniform(1, width))
            h = float(rng.uniform(1, height))
            x = float(rng.uniform(0, width - w))
            y = float(rng.uniform(0, height - h))
            boxes.append((x, y, w, h))
        boxes_by_class[class_id] = boxes
    return boxes_by_class, width, height


def oracle_ap_at_k(flags: list[bool], k: int, by_hits: bool) -> float:
    """AP from the definition: sum of precision at each relevant rank."""
    total = 0.0
    for i in range(len(flags)):
        if flags[i]:
            precision = sum(flags[: i + 1]) / (i + 1)
            total += precision
    if by_hits:
        return total / max(1, sum(flags))
    return total / k


def oracle_blur_at(pixels: np.ndarray, sigma: float, row: int, col: int,
                   channel: int) -> float:
    """Direct 2-D convolution of the Gaussian at one pixel, mirrored
    borders, no separability shortcut."""
    radius = math.floor(3 * sigma + 0.5)
    height, width = pixels.shape[:2]

    def reflect(i: int, n: int) -> int:
        if n == 1:
            return 0
        period = 2 * n - 2
        m = abs(i) % period
        return period - m if m >= n else m

    total = 0.0
    weight_sum = 0.0
    for dy in range(-radius, radius + 1):
        wy = math.exp(-(dy * dy) / (2 * sigma * sigma))
        for dx in range(-radius, radius + 1):
            wx = math.exp(-(dx * dx) / (2 * sigma * sigma))
            r = reflect(row + dy, height)
            c = reflect(col + dx, width)
            total += wy * wx * float(pixels[r, c, channel])
            weight_sum += wy * wx
    return total / weight_sum
