"""Drive an inpainting engine over a planning manifest.

The real generative model is external to this repository; what ships
here is the manifest protocol plus an ``identity`` engine that copies
the source pixels, which is enough to run the whole pipeline end to end
and to validate dimensions, mask decoding, and status reporting.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from . import formats
from .errors import FormatError, ModelLoadError

# an engine maps (source RGB array, boolean mask) -> filled RGB array
Engine = Callable[[np.ndarray, np.ndarray], np.ndarray]


def identity_engine(pixels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return pixels


def load_engine(model_id: str) -> Engine:
    if model_id == "identity":
        return identity_engine
    raise ModelLoadError(f"unknown inpainting model {model_id!r} (only the "
                         f"'identity' stub ships with the adapter)")


def decode_mask_png(blob: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(blob)) as img:
        return np.asarray(img.convert("L")) >= 128


def decode_mask_rle(blob: bytes) -> np.ndarray:
    """Uncompressed run lengths, zeros first, column-major scan."""
    import json

    try:
        obj = json.loads(blob)
        height, width = obj["size"]
        counts = obj["counts"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad RLE payload: {exc}") from exc
    if sum(counts) != height * width:
        raise FormatError(f"RLE counts sum {sum(counts)} != {height * width}")
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        flat[pos:pos + run] = value
        pos += run
        value = not value
    return flat.reshape((width, height)).T  # column-major storage


def read_mask(path: Path, mask_format: str) -> np.ndarray:
    blob = path.read_bytes()
    if mask_format == "png":
        return decode_mask_png(blob)
    if mask_format == "rle":
        return decode_mask_rle(blob)
    raise FormatError(f"unknown mask format {mask_format!r}")


@dataclass
class InpaintReport:
    ok: list[str] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)


def _fill_one(rec: dict, engine: Engine) -> None:
    source = rec.get("source_image_path")
    if not source:
        raise FormatError("record has no source_image_path")
    with Image.open(source) as img:
        pixels = np.asarray(img.convert("RGB"))
    mask = read_mask(Path(rec["mask_path"]), rec["mask_format"])
    if mask.shape != pixels.shape[:2]:
        raise FormatError(f"mask {mask.shape} does not match image "
                          f"{pixels.shape[:2]}")
    filled = engine(pixels, mask)
    if filled.shape != pixels.shape:
        raise FormatError("engine changed the image dimensions")
    out_path = Path(rec["fill_outputs"]["inpaint"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    Image.fromarray(filled.astype(np.uint8), "RGB").save(buf, format="PNG")
    formats.atomic_write_bytes(out_path, buf.getvalue())


def inpaint_from_manifest(manifest_path: str | Path,
                          model_id: str = "identity") -> InpaintReport:
    """Fill every plan's ``inpaint`` slot and write the status back.

    Failures are per-item: one broken mask or missing source leaves the
    other plans untouched, and the rewritten manifest says which is
    which via an ``inpaint_status`` field.
    """
    engine = load_engine(model_id)
    header, records = formats.read_jsonl(manifest_path)
    report = InpaintReport()
    for rec in records:
        key = f"{rec.get('image_id')}/{rec.get('trigger_class')}"
        try:
            _fill_one(rec, engine)
        except (OSError, FormatError, KeyError) as exc:
            rec["inpaint_status"] = f"failed: {exc}"
            report.failed.append((key, str(exc)))
        else:
            rec["inpaint_status"] = "ok"
            report.ok.append(key)
    formats.write_jsonl(manifest_path, records, header=header)
    return report
