"""Embedding jobs: images or captions in, one EMBD file out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from . import formats
from .errors import AdapterError, DuplicateIdError, FormatError
from .models import TinyDualEncoder, preprocess_image

DEFAULT_BATCH_SIZE = 16


@dataclass(frozen=True)
class AdapterJob:
    """One adapter invocation, as parsed from the command line."""

    model_id: str
    output_path: Path
    manifest_path: Path | None = None
    batch_size: int = DEFAULT_BATCH_SIZE
    device: str = "cpu"
    # written EMBD/SIMM files carry this version; it must track the
    # evaluation toolkit's reader
    format_version: int = formats.FORMAT_VERSION

    def __post_init__(self):
        if self.format_version != formats.FORMAT_VERSION:
            raise FormatError(
                f"adapter writes format version {formats.FORMAT_VERSION}, "
                f"job asked for {self.format_version}")
        if self.batch_size < 1:
            raise AdapterError("batch size must be >= 1")


@dataclass
class EmbedResult:
    ids: list[str]
    skipped: list[tuple[str, str]] = field(default_factory=list)


def _check_unique(ids: list[str]) -> None:
    seen = set()
    for item in ids:
        if item in seen:
            raise DuplicateIdError(f"duplicate id {item!r}")
        seen.add(item)


def images_from_manifest(manifest_path: str | Path,
                         slot: str = "inpaint") -> list[tuple[str, Path]]:
    """(id, path) pairs for one fill slot of a planning manifest; the id
    is the output file stem (imageid_triggerid), unique per plan."""
    _, records = formats.read_jsonl(manifest_path)
    out = []
    for rec in records:
        if slot == "source":
            path = rec.get("source_image_path")
            if path is None:
                raise FormatError(f"{manifest_path}: record for image "
                                  f"{rec.get('image_id')} has no source path")
        else:
            try:
                path = rec["fill_outputs"][slot]
            except KeyError as exc:
                raise FormatError(f"{manifest_path}: no fill slot {slot!r} "
                                  f"for image {rec.get('image_id')}") from exc
        out.append((Path(path).stem, Path(path)))
    return out


def embed_images(items: list[tuple[str, Path]], model: TinyDualEncoder,
                 out_path: str | Path,
                 batch_size: int = DEFAULT_BATCH_SIZE) -> EmbedResult:
    """Encode images and write an EMBD file.

    Undecodable or missing images are skipped and reported, matching the
    contract that one bad file must not sink a batch job.
    """
    _check_unique([item_id for item_id, _ in items])
    kept_ids: list[str] = []
    tensors: list[torch.Tensor] = []
    skipped: list[tuple[str, str]] = []
    for item_id, path in items:
        try:
            with Image.open(path) as img:
                array = np.asarray(img.convert("RGB"))
        except (OSError, ValueError) as exc:
            skipped.append((item_id, str(exc)))
            continue
        kept_ids.append(item_id)
        tensors.append(preprocess_image(array))
    if not kept_ids:
        raise AdapterError("no decodable images in the job")

    chunks = []
    for start in range(0, len(tensors), batch_size):
        batch = torch.stack(tensors[start:start + batch_size])
        chunks.append(model.encode_images(batch).cpu().numpy())
    formats.write_embd(out_path, kept_ids, np.concatenate(chunks, axis=0))
    return EmbedResult(kept_ids, skipped)


def load_caption_records(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs from a captions JSON (COCO layout), a synthetic
    pairs JSONL, or a generic id/text JSONL."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            data = json.load(fh)
        try:
            return [(str(a["id"]), a["caption"]) for a in data["annotations"]]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: not a captions JSON: {exc}") from exc
    _, records = formats.read_jsonl(path)
    out = []
    for rec in records:
        if "pair_id" in rec:
            out.append((str(rec["pair_id"]), rec["caption"]))
        elif "id" in rec:
            out.append((str(rec["id"]), rec.get("text", rec.get("caption"))))
        else:
            raise FormatError(f"{path}: record without pair_id/id")
    if any(text is None for _, text in out):
        raise FormatError(f"{path}: record without caption text")
    return out


def embed_captions(items: list[tuple[str, str]], model: TinyDualEncoder,
                   out_path: str | Path,
                   batch_size: int = DEFAULT_BATCH_SIZE) -> EmbedResult:
    _check_unique([item_id for item_id, _ in items])
    if not items:
        raise AdapterError("no captions in the job")
    ids = [item_id for item_id, _ in items]
    chunks = []
    for start in range(0, len(items), batch_size):
        texts = [text for _, text in items[start:start + batch_size]]
        chunks.append(model.encode_texts(texts).cpu().numpy())
    formats.write_embd(out_path, ids, np.concatenate(chunks, axis=0))
    return EmbedResult(ids)


def cosine_reference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Float64 cosine matrix, used to cross-check scores computed by the
    evaluation toolkit from adapter-written embeddings."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    return a @ b.T
