from __future__ import annotations

import json
from pathlib import Path

import pytest

from decorr.dataset import (
    BBox,
    CaptionRecord,
    ClassVocabulary,
    DatasetBundle,
    ImageRecord,
    NounPhraseSpan,
    ObjectAnnotation,
    tokenize,
)
from decorr.matching import MatchTable, WordListMode

FIXTURES = Path(__file__).parent / "fixtures"

VOCAB_NAMES = ["person", "dog", "frisbee", "horse", "car", "chair"]

ALIASES = {
    "person": {"man", "woman"},
    "dog": {"puppy"},
    "frisbee": {"disc"},
    "horse": {"pony"},
    "car": {"van"},
    "chair": {"stool"},
}


@pytest.fixture(scope="session")
def vocab() -> ClassVocabulary:
    return ClassVocabulary(list(VOCAB_NAMES))


@pytest.fixture(scope="session")
def word_mode(vocab) -> WordListMode:
    return WordListMode.build(MatchTable({k: set(v) for k, v in ALIASES.items()}), vocab)


def make_caption(caption_id: int, image_id: int, text: str,
                 spans: list[tuple] = ()) -> CaptionRecord:
    tokens = tokenize(text)
    rec = CaptionRecord(caption_id=caption_id, image_id=image_id,
                        text=text, tokens=tokens)
    for span in spans:
        start, end = span[0], span[1]
        class_id = span[2] if len(span) > 2 else None
        rec.np_spans.append(NounPhraseSpan(
            caption_id, start, end, " ".join(tokens[start:end]), class_id))
    return rec


def make_image(image_id: int, width: int, height: int,
               boxes: list[tuple[float, float, float, float, int]]) -> ImageRecord:
    rec = ImageRecord(image_id=image_id, width=width, height=height)
    for (x, y, w, h, class_id) in boxes:
        rec.objects.append(ObjectAnnotation(BBox(x, y, w, h), class_id))
    return rec


def make_bundle(vocab: ClassVocabulary, images: list[ImageRecord],
                captions: list[CaptionRecord],
                splits: dict[int, str] | None = None) -> DatasetBundle:
    bundle = DatasetBundle(vocabulary=vocab)
    for image in images:
        bundle.images[image.image_id] = image
        bundle.splits[image.image_id] = (splits or {}).get(image.image_id, "train")
    for caption in captions:
        bundle.captions[caption.caption_id] = caption
        bundle.images[caption.image_id].caption_ids.append(caption.caption_id)
    for image in bundle.images.values():
        image.caption_ids.sort()
    return bundle


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path
