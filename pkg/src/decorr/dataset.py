"""Annotation ingestion: detection boxes, captions, and noun-phrase chunks.

Reads COCO-style instances/captions JSON plus a JSONL chunk file into an
immutable in-memory bundle. All text is normalized once at load time
(lowercase, whitespace split, per-token edge punctuation stripped) so the
rest of the toolkit can match words exactly.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BoundsError,
    DanglingImageError,
    OverlappingSpansError,
    ParseError,
    SpanOutOfRangeError,
    UnknownCaptionError,
    UnknownClassError,
)

BBOX_CLAMP_TOLERANCE = 1.0

SPLIT_TAGS = ("train", "val", "test")


def normalize_name(name: str) -> str:
    """Lowercase and collapse internal whitespace of a class name."""
    return " ".join(name.lower().split())


def _strip_edge_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Normalize caption text to matchable tokens.

    Lowercases, splits on Unicode whitespace, strips leading/trailing
    punctuation per token, and drops tokens that become empty. The result
    joined with single spaces is itself whitespace-normalized.
    """
    tokens = []
    for raw in text.lower().split():
        tok = _strip_edge_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel units, (x, y) = top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def corners(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.x + self.w, self.y + self.h


@dataclass(frozen=True)
class ObjectAnnotation:
    bbox: BBox
    class_id: int


class ClassVocabulary:
    """Ordered class names with lookup by index and by normalized name."""

    def __init__(self, names: list[str]):
        self._names = [normalize_name(n) for n in names]
        self._index = {n: i for i, n in enumerate(self._names)}
        if len(self._index) != len(self._names):
            raise ParseError("class vocabulary contains duplicate names after normalization")

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self):
        return iter(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassVocabulary) and self._names == other._names

    def name(self, class_id: int) -> str:
        return self._names[class_id]

    def names(self) -> list[str]:
        return list(self._names)

    def index(self, name: str) -> int:
        key = normalize_name(name)
        if key not in self._index:
            raise UnknownClassError(f"class {name!r} not in vocabulary")
        return self._index[key]

    def __contains__(self, name: str) -> bool:
        return normalize_name(name) in self._index

    @classmethod
    def from_instances(cls, path: str | Path) -> "ClassVocabulary":
        """Build a vocabulary from the categories block of an instances file,
        ordered by category id."""
        doc = _read_json(path)
        cats = doc.get("categories")
        if not isinstance(cats, list) or not cats:
            raise ParseError(f"{path}: no categories block")
        try:
            ordered = sorted(cats, key=lambda c: c["id"])
            return cls([c["name"] for c in ordered])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed categories entry: {exc}") from exc


@dataclass(frozen=True)
class NounPhraseSpan:
    """Half-open token range [token_start, token_end) within one caption."""

    caption_id: int
    token_start: int
    token_end: int
    surface_text: str
    class_id: int | None = None


@dataclass
class CaptionRecord:
    caption_id: int
    image_id: int
    text: str
    tokens: list[str]
    np_spans: list[NounPhraseSpan] = field(default_factory=list)


@dataclass
class ImageRecord:
    image_id: int
    width: int
    height: int
    objects: list[ObjectAnnotation] = field(default_factory=list)
    caption_ids: list[int] = field(default_factory=list)
    file_name: str | None = None

    def class_ids(self) -> set[int]:
        return {obj.class_id for obj in self.objects}


@dataclass
class ValidationEntry:
    severity: str
    code: str
    subject_id: str
    message: str


class ValidationReport:
    """Accumulates non-fatal findings during loading; serializable as JSONL."""

    def __init__(self):
        self.entries: list[ValidationEntry] = []

    def add(self, severity: str, code: str, subject_id, message: str) -> None:
        self.entries.append(ValidationEntry(severity, code, str(subject_id), message))

    def warnings(self) -> list[ValidationEntry]:
        return [e for e in self.entries if e.severity == "warning"]

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps({
                    "severity": e.severity,
                    "code": e.code,
                    "subject_id": e.subject_id,
                    "message": e.message,
                }, sort_keys=True) + "\n")


@dataclass
class DatasetBundle:
    vocabulary: ClassVocabulary
    images: dict[int, ImageRecord] = field(default_factory=dict)
    captions: dict[int, CaptionRecord] = field(default_factory=dict)
    splits: dict[int, str] = field(default_factory=dict)

    def split_of(self, image_id: int) -> str:
        return self.splits.get(image_id, "train")

    def captions_of(self, image_id: int) -> list[CaptionRecord]:
        return [self.captions[cid] for cid in self.images[image_id].caption_ids]

    def to_dict(self) -> dict:
        return {
            "vocabulary": self.vocabulary.names(),
            "images": [
                {
                    "image_id": im.image_id,
                    "width": im.width,
                    "height": im.height,
                    "split": self.split_of(im.image_id),
                    "file_name": im.file_name,
                    "objects": [
                        {"bbox": list(o.bbox.corners()[:2]) + [o.bbox.w, o.bbox.h],
                         "class_id": o.class_id}
                        for o in im.objects
                    ],
                    "caption_ids": list(im.caption_ids),
                }
                for im in sorted(self.images.values(), key=lambda im: im.image_id)
            ],
            "captions": [
                {
                    "caption_id": c.caption_id,
                    "image_id": c.image_id,
                    "text": c.text,
                    "tokens": list(c.tokens),
                    "np_spans": [
                        {"token_start": s.token_start, "token_end": s.token_end,
                         "class_id": s.class_id}
                        for s in c.np_spans
                    ],
                }
                for c in sorted(self.captions.values(), key=lambda c: c.caption_id)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetBundle":
        bundle = cls(vocabulary=ClassVocabulary(doc["vocabulary"]))
        for im in doc["images"]:
            x = ImageRecord(
                image_id=im["image_id"], width=im["width"], height=im["height"],
                objects=[ObjectAnnotation(BBox(*o["bbox"]), o["class_id"])
                         for o in im["objects"]],
                caption_ids=list(im["caption_ids"]),
                file_name=im.get("file_name"),
            )
            bundle.images[x.image_id] = x
            bundle.splits[x.image_id] = im.get("split", "train")
        for c in doc["captions"]:
            rec = CaptionRecord(
                caption_id=c["caption_id"], image_id=c["image_id"],
                text=c["text"], tokens=list(c["tokens"]),
            )
            rec.np_spans = [
                NounPhraseSpan(rec.caption_id, s["token_start"], s["token_end"],
                               " ".join(rec.tokens[s["token_start"]:s["token_end"]]),
                               s.get("class_id"))
                for s in c["np_spans"]
            ]
            bundle.captions[rec.caption_id] = rec
        return bundle

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)

    @classmethod
    def load(cls, path: str | Path) -> "DatasetBundle":
        return cls.from_dict(_read_json(path))


def _read_json(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def _clamped_bbox(raw: list[float], width: int, height: int, image_id) -> BBox:
    """Clamp a COCO [x, y, w, h] box to image bounds.

    Overshoot up to BBOX_CLAMP_TOLERANCE px on any side is clamped away;
    anything worse is rejected. Real annotations carry sub-pixel overshoot.
    """
    try:
        x, y, w, h = (float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"image {image_id}: malformed bbox {raw!r}") from exc
    if w <= 0 or h <= 0:
        raise BoundsError(f"image {image_id}: non-positive box size {raw!r}")
    left, top, right, bottom = x, y, x + w, y + h
    tol = BBOX_CLAMP_TOLERANCE
    if (left < -tol or top < -tol
            or right > width + tol or bottom > height + tol):
        raise BoundsError(
            f"image {image_id}: box {raw!r} exceeds {width}x{height} by more than {tol} px")
    left, top = max(left, 0.0), max(top, 0.0)
    right, bottom = min(right, float(width)), min(bottom, float(height))
    if right <= left or bottom <= top:
        raise BoundsError(f"image {image_id}: box {raw!r} collapses after clamping")
    return BBox(left, top, right - left, bottom - top)


def load_instances(path: str | Path, vocab: ClassVocabulary,
                   report: ValidationReport | None = None) -> DatasetBundle:
    """Read a COCO-style instances file into a partial bundle.

    Expects ``images[].id/width/height``, ``annotations[].image_id/bbox/
    category_id``, ``categories[].id/name``. Category ids are reconciled
    against ``vocab`` by name; an optional ``split`` field per image tags
    the record (default "train").
    """
    doc = _read_json(path)
    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise ParseError(f"{path}: missing top-level field {key!r}")

    cat_to_class: dict[int, int] = {}
    for cat in doc["categories"]:
        try:
            cat_id, name = cat["id"], cat["name"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed category entry {cat!r}") from exc
        cat_to_class[cat_id] = vocab.index(name)

    bundle = DatasetBundle(vocabulary=vocab)
    for im in doc["images"]:
        try:
            rec = ImageRecord(image_id=im["id"], width=int(im["width"]),
                              height=int(im["height"]), file_name=im.get("file_name"))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed image entry {im!r}") from exc
        if rec.width <= 0 or rec.height <= 0:
            raise BoundsError(f"image {rec.image_id}: non-positive dimensions")
        split = im.get("split", "train")
        if split not in SPLIT_TAGS:
            raise ParseError(f"image {rec.image_id}: unknown split tag {split!r}")
        bundle.images[rec.image_id] = rec
        bundle.splits[rec.image_id] = split

    for ann in doc["annotations"]:
        try:
            image_id, bbox_raw, cat_id = ann["image_id"], ann["bbox"], ann["category_id"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed annotation entry {ann!r}") from exc
        if image_id not in bundle.images:
            raise ParseError(f"annotation references unknown image {image_id}")
        if cat_id not in cat_to_class:
            raise UnknownClassError(f"annotation references unknown category id {cat_id}")
        image = bundle.images[image_id]
        bbox = _clamped_bbox(bbox_raw, image.width, image.height, image_id)
        image.objects.append(ObjectAnnotation(bbox, cat_to_class[cat_id]))

    if report is not None:
        for im in bundle.images.values():
            if not im.objects:
                report.add("warning", "no_objects", im.image_id,
                           "image has no object annotations")
    return bundle


def load_captions(path: str | Path, bundle: DatasetBundle,
                  report: ValidationReport | None = None) -> DatasetBundle:
    """Attach COCO-style captions (``annotations[].image_id/id/caption``)."""
    doc = _read_json(path)
    if "annotations" not in doc:
        raise ParseError(f"{path}: missing top-level field 'annotations'")
    for ann in doc["annotations"]:
        try:
            caption_id, image_id, text = ann["id"], ann["image_id"], ann["caption"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed caption entry {ann!r}") from exc
        if image_id not in bundle.images:
            raise DanglingImageError(
                f"caption {caption_id} references unknown image {image_id}")
        rec = CaptionRecord(caption_id=caption_id, image_id=image_id,
                            text=text, tokens=tokenize(text))
        if not rec.tokens and report is not None:
            report.add("warning", "empty_caption", caption_id,
                       "caption has zero tokens after normalization")
        bundle.captions[caption_id] = rec
        bundle.images[image_id].caption_ids.append(caption_id)
    for im in bundle.images.values():
        im.caption_ids.sort()
    return bundle


def load_np_chunks(path: str | Path, bundle: DatasetBundle) -> DatasetBundle:
    """Attach noun-phrase spans from a JSONL file.

    One record per caption: ``{"caption_id": int, "spans": [[start, end], ...]}``.
    A span may carry an optional third element, the annotated class id
    (annotated-pairs matching). Spans are sorted and must not overlap;
    surface text is materialized from the caption tokens.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                caption_id = rec["caption_id"]
                spans = rec["spans"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed chunk record: {exc}") from exc
            if caption_id not in bundle.captions:
                raise UnknownCaptionError(
                    f"{path}:{lineno}: unknown caption {caption_id}")
            caption = bundle.captions[caption_id]
            parsed: list[NounPhraseSpan] = []
            for span in spans:
                if not isinstance(span, list) or len(span) not in (2, 3):
                    raise ParseError(f"{path}:{lineno}: malformed span {span!r}")
                start, end = span[0], span[1]
                class_id = span[2] if len(span) == 3 else None
                if not (0 <= start < end <= len(caption.tokens)):
                    raise SpanOutOfRangeError(
                        f"caption {caption_id}: span [{start}, {end}) outside "
                        f"{len(caption.tokens)} tokens")
                if class_id is not None and not (0 <= class_id < len(bundle.vocabulary)):
                    raise UnknownClassError(
                        f"caption {caption_id}: span class id {class_id} not in vocabulary")
                parsed.append(NounPhraseSpan(
                    caption_id, start, end,
                    " ".join(caption.tokens[start:end]), class_id))
            parsed.sort(key=lambda s: s.token_start)
            for prev, cur in zip(parsed, parsed[1:]):
                if cur.token_start < prev.token_end:
                    raise OverlappingSpansError(
                        f"caption {caption_id}: spans overlap at token {cur.token_start}")
            caption.np_spans = parsed
    return bundle


def validate_bundle(bundle: DatasetBundle, report: ValidationReport | None = None) -> None:
    """Check cross-references and the every-image-has-a-caption invariant."""
    for im in bundle.images.values():
        if not im.caption_ids:
            raise DanglingImageError(f"image {im.image_id} has no captions")
        for cid in im.caption_ids:
            if cid not in bundle.captions:
                raise UnknownCaptionError(
                    f"image {im.image_id} references missing caption {cid}")
    for cap in bundle.captions.values():
        if cap.image_id not in bundle.images:
            raise DanglingImageError(
                f"caption {cap.caption_id} references missing image {cap.image_id}")
    if report is not None:
        for cap in bundle.captions.values():
            if not cap.tokens:
                report.add("warning", "empty_caption", cap.caption_id,
                           "caption has zero tokens")


DEFAULT_WORD_CLASS = "noun"

_CHUNKABLE = {"det", "adj", "noun"}


def naive_np_chunk(caption: CaptionRecord, lexicon: dict[str, str]) -> list[NounPhraseSpan]:
    """Fallback chunker: greedy maximal runs of (determiner? adjective* noun+).

    Words absent from the lexicon are treated as nouns, which biases the
    chunker toward recall. Only a convenience for corpora without chunk
    annotations; curated chunk files are the primary input channel.
    """
    def word_class(tok: str) -> str:
        return lexicon.get(tok, DEFAULT_WORD_CLASS)

    spans: list[NounPhraseSpan] = []
    tokens = caption.tokens
    i = 0
    while i < len(tokens):
        j = i
        if j < len(tokens) and word_class(tokens[j]) == "det":
            j += 1
        while j < len(tokens) and word_class(tokens[j]) == "adj":
            j += 1
        nouns = 0
        while j < len(tokens) and word_class(tokens[j]) == "noun":
            j += 1
            nouns += 1
        if nouns > 0:
            spans.append(NounPhraseSpan(
                caption.caption_id, i, j, " ".join(tokens[i:j])))
            i = j
        else:
            i += 1
    return spans


def load_chunk_lexicon(path: str | Path) -> dict[str, str]:
    doc = _read_json(path)
    bad = {w: c for w, c in doc.items() if c not in _CHUNKABLE | {"other"}}
    if bad:
        raise ParseError(f"{path}: unknown word classes {bad}")
    return {w.lower(): c for w, c in doc.items()}
