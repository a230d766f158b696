import json
from pathlib import Path

import numpy as np
import pytest
import torch

from decorr_adapter.embed import (
    embed_captions,
    embed_images,
    images_from_manifest,
    load_caption_records,
    AdapterJob,
)
from decorr_adapter.errors import (
    AdapterError,
    DuplicateIdError,
    FormatError,
)
from decorr_adapter.formats import read_embd, write_jsonl
from decorr_adapter.models import load_model

from .conftest import make_png


@pytest.fixture(scope="module")
def model():
    return load_model("tiny-random:d8")


def make_images(tmp_path, names):
    items = []
    for i, name in enumerate(names):
        path = tmp_path / f"{name}.png"
        make_png(path, 24 + i, 20, seed=i)
        items.append((name, path))
    return items


def test_embed_images_writes_one_vector_per_id(tmp_path, model):
    items = make_images(tmp_path, ["a", "b", "c"])
    result = embed_images(items, model, tmp_path / "out.embd", batch_size=2)
    assert result.ids == ["a", "b", "c"]
    assert result.skipped == []
    ids, vectors = read_embd(tmp_path / "out.embd")
    assert ids == ["a", "b", "c"]
    assert vectors.shape == (3, 8)


def test_duplicate_ids_rejected_before_inference(tmp_path, model):
    items = make_images(tmp_path, ["a", "b"])
    items.append(items[0])
    with pytest.raises(DuplicateIdError):
        embed_images(items, model, tmp_path / "out.embd")
    assert not (tmp_path / "out.embd").exists()


def test_undecodable_image_skipped_with_warning(tmp_path, model):
    items = make_images(tmp_path, ["good1", "good2"])
    broken = tmp_path / "broken.png"
    broken.write_bytes(b"this is not a png")
    items.insert(1, ("broken", broken))
    result = embed_images(items, model, tmp_path / "out.embd")
    assert result.ids == ["good1", "good2"]
    assert [item_id for item_id, _ in result.skipped] == ["broken"]
    ids, vectors = read_embd(tmp_path / "out.embd")
    assert ids == ["good1", "good2"]


def test_all_images_broken_is_an_error(tmp_path, model):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"nope")
    with pytest.raises(AdapterError):
        embed_images([("bad", bad)], model, tmp_path / "out.embd")


def test_batch_size_does_not_change_embeddings(tmp_path, model):
    items = make_images(tmp_path, ["a", "b", "c", "d", "e"])
    embed_images(items, model, tmp_path / "one.embd", batch_size=1)
    embed_images(items, model, tmp_path / "big.embd", batch_size=64)
    _, singles = read_embd(tmp_path / "one.embd")
    _, batched = read_embd(tmp_path / "big.embd")
    assert np.allclose(singles, batched, atol=1e-6)


def test_embed_captions_from_coco_json(tmp_path, model):
    captions = {"annotations": [
        {"id": 7, "image_id": 1, "caption": "A dog runs."},
        {"id": 9, "image_id": 1, "caption": "A man waits."},
    ]}
    path = tmp_path / "captions.json"
    path.write_text(json.dumps(captions))
    items = load_caption_records(path)
    assert items == [("7", "A dog runs."), ("9", "A man waits.")]
    embed_captions(items, model, tmp_path / "g.embd")
    ids, vectors = read_embd(tmp_path / "g.embd")
    assert ids == ["7", "9"]
    assert vectors.shape == (2, 8)


def test_embed_captions_from_pairs_jsonl(tmp_path):
    write_jsonl(tmp_path / "pairs.jsonl", [
        {"pair_id": "p000000", "caption": "a dog chasing"},
        {"pair_id": "p000001", "caption": "a man with"},
    ], header={"command": "captions"})
    items = load_caption_records(tmp_path / "pairs.jsonl")
    assert [i for i, _ in items] == ["p000000", "p000001"]


def test_caption_records_reject_textless_lines(tmp_path):
    write_jsonl(tmp_path / "bad.jsonl", [{"id": 1}])
    with pytest.raises(FormatError):
        load_caption_records(tmp_path / "bad.jsonl")


def test_images_from_manifest_slots(tmp_path):
    records = [{
        "image_id": 1,
        "trigger_class": "dog",
        "source_image_path": str(tmp_path / "src" / "1.png"),
        "fill_outputs": {"inpaint": str(tmp_path / "fill" / "1_1.png"),
                         "zero": str(tmp_path / "zero" / "1_1.png")},
    }]
    write_jsonl(tmp_path / "manifest.jsonl", records)
    assert images_from_manifest(tmp_path / "manifest.jsonl") == \
        [("1_1", tmp_path / "fill" / "1_1.png")]
    assert images_from_manifest(tmp_path / "manifest.jsonl", "source") == \
        [("1", tmp_path / "src" / "1.png")]
    with pytest.raises(FormatError):
        images_from_manifest(tmp_path / "manifest.jsonl", "blur")


def test_job_rejects_foreign_format_version(tmp_path):
    with pytest.raises(FormatError):
        AdapterJob("tiny-random", tmp_path / "x.embd", format_version=2)
    with pytest.raises(AdapterError):
        AdapterJob("tiny-random", tmp_path / "x.embd", batch_size=0)
