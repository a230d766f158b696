"""Object-removal planning.

For each (image, trigger class) pair, decides whether removing the
trigger's boxes yields a usable synthetic image: the trigger region must
not cover too much of any kept class (else nothing), classes it covers
almost entirely are removed along with it, and oversized removal regions
are rejected outright. Emits masks, padded fill images, and a manifest
for an external inpainting model.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifacts import write_jsonl, read_jsonl
from .dataset import DatasetBundle, ImageRecord
from .errors import (
    DimensionMismatchError,
    EmptyMaskWarning,
    ParseError,
    PreconditionError,
)
from .masks import (
    MaskRaster,
    mask_to_rle,
    overlap_ratio,
    round_half_up,
    union_mask,
    write_mask_png,
    write_mask_rle,
)

DEFAULT_ALPHA1 = 0.4
DEFAULT_ALPHA2 = 0.8
DEFAULT_ALPHA3 = 0.7
DEFAULT_BLUR_SIGMA = 8.0


@dataclass(frozen=True)
class PlanConfig:
    """Removal thresholds.

    alpha1: max overlap (against a kept class's region) tolerated for a
    single-class removal. alpha2: overlap above which the other class is
    removed together with the trigger. alpha3: max removal-region size
    relative to the image.
    """

    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2
    alpha3: float = DEFAULT_ALPHA3
    strict_eq3_union: bool = False
    blur_sigma: float = DEFAULT_BLUR_SIGMA

    def __post_init__(self):
        if not (0 < self.alpha1 <= self.alpha2 <= 1):
            raise PreconditionError(
                f"need 0 < alpha1 <= alpha2 <= 1, got {self.alpha1}, {self.alpha2}")
        if not (0 < self.alpha3 <= 1):
            raise PreconditionError(f"need 0 < alpha3 <= 1, got {self.alpha3}")
        if self.blur_sigma <= 0:
            raise PreconditionError(f"need blur_sigma > 0, got {self.blur_sigma}")


class PlanKind(enum.Enum):
    SINGLE_CLASS = "single"
    MULTI_CLASS = "multi"


class FillMode(enum.Enum):
    ZERO = "zero"
    MEAN = "mean"
    BLUR = "blur"


class MaskFormat(enum.Enum):
    PNG = "png"
    RLE = "rle"


@dataclass
class RemovalPlan:
    image_id: int
    trigger_class: int
    removed_classes: frozenset[int]
    kept_classes: frozenset[int]
    mask: MaskRaster
    kind: PlanKind

    def __post_init__(self):
        if self.trigger_class not in self.removed_classes:
            raise PreconditionError("trigger class must be in the removed set")
        if self.removed_classes & self.kept_classes:
            raise PreconditionError("removed and kept classes must be disjoint")
        if not self.kept_classes:
            raise PreconditionError("a plan must keep at least one class")


def plan_for_class(image: ImageRecord, trigger: int,
                   cfg: PlanConfig | None = None) -> RemovalPlan | None:
    """Removal decision for one (image, trigger class) pair.

    Returns None when no synthetic image should be made: the removal
    region is too large, the trigger partially-but-substantially covers a
    class that should stay, or removing co-covered classes would leave
    nothing in the image.
    """
    cfg = cfg or PlanConfig()
    classes = sorted(image.class_ids())
    if len(classes) < 2:
        raise PreconditionError(
            f"image {image.image_id} has {len(classes)} distinct classes, need >= 2")
    if trigger not in classes:
        raise PreconditionError(
            f"trigger class {trigger} not present in image {image.image_id}")

    dims = (image.width, image.height)
    image_area = image.width * image.height
    mask_q = union_mask(image.objects, {trigger}, dims)

    if not cfg.strict_eq3_union:
        if mask_q.area() / image_area > cfg.alpha3:
            return None

    others = [c for c in classes if c != trigger]
    other_masks = {c: union_mask(image.objects, {c}, dims) for c in others}
    overlaps = {c: overlap_ratio(mask_q, other_masks[c]) for c in others}

    if all(r < cfg.alpha1 for r in overlaps.values()):
        kind = PlanKind.SINGLE_CLASS
        removed = frozenset({trigger})
        mask = mask_q
    elif any(r > cfg.alpha2 for r in overlaps.values()):
        kind = PlanKind.MULTI_CLASS
        removed = frozenset({trigger} | {c for c in others if overlaps[c] > cfg.alpha2})
        mask = mask_q
        for c in removed - {trigger}:
            mask = mask.union(other_masks[c])
    else:
        return None

    kept = frozenset(classes) - removed
    if not kept:
        return None

    if cfg.strict_eq3_union:
        if not mask.area() / image_area < cfg.alpha3:
            return None

    return RemovalPlan(image.image_id, trigger, removed, kept, mask, kind)


def plan_all(bundle: DatasetBundle, cfg: PlanConfig | None = None,
             splits: set[str] | None = None) -> list[RemovalPlan]:
    """All qualifying plans, ascending image id then ascending trigger.

    Images with fewer than two distinct classes are skipped. When
    ``splits`` is given, only images tagged with one of them are planned.
    """
    cfg = cfg or PlanConfig()
    plans: list[RemovalPlan] = []
    for image_id in sorted(bundle.images):
        if splits is not None and bundle.split_of(image_id) not in splits:
            continue
        image = bundle.images[image_id]
        classes = sorted(image.class_ids())
        if len(classes) < 2:
            continue
        for trigger in classes:
            plan = plan_for_class(image, trigger, cfg)
            if plan is not None:
                plans.append(plan)
    return plans


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = round_half_up(3 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets ** 2) / (2 * sigma * sigma))
    return kernel / kernel.sum()


def reflect_index(i: int | np.ndarray, n: int):
    """Mirror an out-of-range index about the array edges without
    repeating the edge sample (…, a[2], a[1], a[0], a[1], a[2], …)."""
    if n == 1:
        return np.zeros_like(np.asarray(i))
    period = 2 * n - 2
    m = np.abs(np.asarray(i)) % period
    return np.where(m >= n, period - m, m)


def _gaussian_blur(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian over float64, mirror-reflected borders."""
    kernel = _gaussian_kernel(sigma)
    radius = (len(kernel) - 1) // 2
    out = pixels.astype(np.float64)
    for axis in (0, 1):
        n = out.shape[axis]
        idx = reflect_index(np.arange(-radius, n + radius), n)
        padded = np.take(out, idx, axis=axis)
        out = np.apply_along_axis(
            lambda row: np.convolve(row, kernel, mode="valid"), axis, padded)
    return out


def apply_fill(image_pixels: np.ndarray, mask: MaskRaster, mode: FillMode,
               blur_sigma: float = DEFAULT_BLUR_SIGMA) -> np.ndarray:
    """Fill the masked region of an (H, W, 3) uint8 raster.

    Zero: black. Mean: the per-channel average of the region's original
    pixels. Blur: a Gaussian blur of the whole original image sampled at
    the masked positions. Unmasked pixels are returned bit-identical.
    """
    if image_pixels.ndim != 3 or image_pixels.shape[2] != 3:
        raise DimensionMismatchError(
            f"expected (H, W, 3) pixels, got shape {image_pixels.shape}")
    if image_pixels.shape[:2] != mask.data.shape:
        raise DimensionMismatchError(
            f"pixels {image_pixels.shape[:2]} vs mask {mask.data.shape}")
    out = image_pixels.copy()
    if mask.area() == 0:
        warnings.warn("fill requested for an empty mask", EmptyMaskWarning)
        return out

    if mode is FillMode.ZERO:
        out[mask.data] = 0
    elif mode is FillMode.MEAN:
        region = image_pixels[mask.data].astype(np.float64)
        mean = np.floor(region.mean(axis=0) + 0.5).astype(np.uint8)
        out[mask.data] = mean
    elif mode is FillMode.BLUR:
        blurred = _gaussian_blur(image_pixels, blur_sigma)
        values = np.clip(np.floor(blurred + 0.5), 0, 255).astype(np.uint8)
        out[mask.data] = values[mask.data]
    else:
        raise PreconditionError(f"unknown fill mode {mode!r}")
    return out


def mask_filename(image_id: int, trigger_class: int, fmt: MaskFormat) -> str:
    suffix = "png" if fmt is MaskFormat.PNG else "json"
    return f"{image_id}_{trigger_class}.{suffix}"


def fill_filename(image_id: int, trigger_class: int) -> str:
    return f"{image_id}_{trigger_class}.png"


def export_masks(plans: list[RemovalPlan], bundle: DatasetBundle,
                 out_dir: str | Path, fmt: MaskFormat = MaskFormat.PNG,
                 images_dir: str | Path | None = None,
                 fill_modes: tuple[FillMode, ...] = (),
                 header: dict | None = None) -> Path:
    """Write one mask file per plan plus the manifest JSONL.

    The manifest is the hand-off contract for downstream synthesis: each
    line names the mask, the source image, the planned fill outputs
    (including an ``inpaint`` slot an external model fills in), and the
    removed/kept class names.
    """
    out_dir = Path(out_dir)
    masks_dir = out_dir / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    vocab = bundle.vocabulary

    records = []
    for plan in plans:
        mask_path = masks_dir / mask_filename(plan.image_id, plan.trigger_class, fmt)
        if fmt is MaskFormat.PNG:
            write_mask_png(plan.mask, mask_path)
        else:
            write_mask_rle(plan.mask, mask_path)

        image = bundle.images[plan.image_id]
        source_path = None
        if images_dir is not None:
            name = image.file_name or f"{plan.image_id}.png"
            source_path = str(Path(images_dir) / name)

        fill_outputs = {
            mode.value: str(out_dir / "fill" / mode.value /
                            fill_filename(plan.image_id, plan.trigger_class))
            for mode in fill_modes
        }
        fill_outputs["inpaint"] = str(
            out_dir / "fill" / "inpaint" /
            fill_filename(plan.image_id, plan.trigger_class))

        records.append({
            "image_id": plan.image_id,
            "trigger_class": vocab.name(plan.trigger_class),
            "kind": plan.kind.value,
            "removed_classes": [vocab.name(c) for c in sorted(plan.removed_classes)],
            "kept_classes": [vocab.name(c) for c in sorted(plan.kept_classes)],
            "mask_path": str(mask_path),
            "mask_format": fmt.value,
            "source_image_path": source_path,
            "fill_outputs": fill_outputs,
            "synthetic_caption_ids": [],
        })

    manifest_path = out_dir / "manifest.jsonl"
    write_jsonl(manifest_path, records, header=header)
    return manifest_path


@dataclass
class PlanSummary:
    """A plan as read back from a manifest (no mask raster attached)."""

    image_id: int
    trigger_class: int
    removed_classes: frozenset[int]
    kept_classes: frozenset[int]
    kind: PlanKind
    mask_path: str | None = None


def read_manifest(path: str | Path, bundle: DatasetBundle) -> list[PlanSummary]:
    vocab = bundle.vocabulary
    _, records = read_jsonl(path)
    plans = []
    for rec in records:
        try:
            plans.append(PlanSummary(
                image_id=rec["image_id"],
                trigger_class=vocab.index(rec["trigger_class"]),
                removed_classes=frozenset(vocab.index(n) for n in rec["removed_classes"]),
                kept_classes=frozenset(vocab.index(n) for n in rec["kept_classes"]),
                kind=PlanKind(rec["kind"]),
                mask_path=rec.get("mask_path"),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: malformed manifest line: {exc}") from exc
    return plans


def plan_record(plan: RemovalPlan, bundle: DatasetBundle,
                include_rle: bool = False) -> dict:
    vocab = bundle.vocabulary
    rec = {
        "image_id": plan.image_id,
        "trigger_class": vocab.name(plan.trigger_class),
        "kind": plan.kind.value,
        "removed_classes": [vocab.name(c) for c in sorted(plan.removed_classes)],
        "kept_classes": [vocab.name(c) for c in sorted(plan.kept_classes)],
        "mask_area": plan.mask.area(),
    }
    if include_rle:
        rec["mask_rle"] = mask_to_rle(plan.mask)
    return rec
