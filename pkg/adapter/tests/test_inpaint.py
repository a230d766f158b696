import json

import numpy as np
import pytest
from PIL import Image

from decorr_adapter.errors import ModelLoadError
from decorr_adapter.formats import read_jsonl, write_jsonl
from decorr_adapter.inpaint import (
    decode_mask_rle,
    inpaint_from_manifest,
    load_engine,
    read_mask,
)

from .conftest import make_png


def write_mask_png(path, mask):
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), "L").save(path)


def make_manifest(tmp_path, n_plans=2, break_mask_of=None,
                  wrong_dims_for=None):
    records = []
    for i in range(n_plans):
        source = tmp_path / f"src_{i}.png"
        make_png(source, 30, 20, seed=i)
        mask_path = tmp_path / f"mask_{i}.png"
        if wrong_dims_for == i:
            mask = np.zeros((5, 5), dtype=bool)
        else:
            mask = np.zeros((20, 30), dtype=bool)
            mask[2:8, 3:12] = True
        write_mask_png(mask_path, mask)
        if break_mask_of == i:
            mask_path.unlink()
        records.append({
            "image_id": i,
            "trigger_class": "dog",
            "kind": "single",
            "removed_classes": ["dog"],
            "kept_classes": ["person"],
            "mask_path": str(mask_path),
            "mask_format": "png",
            "source_image_path": str(source),
            "fill_outputs": {"inpaint": str(tmp_path / "fill" / f"{i}_1.png")},
            "synthetic_caption_ids": [],
        })
    manifest = tmp_path / "manifest.jsonl"
    write_jsonl(manifest, records, header={"command": "plan"})
    return manifest


def test_identity_inpaint_fills_every_plan(tmp_path):
    manifest = make_manifest(tmp_path, n_plans=2)
    report = inpaint_from_manifest(manifest, "identity")
    assert report.failed == []
    assert len(report.ok) == 2
    header, records = read_jsonl(manifest)
    assert header == {"command": "plan"}  # rewrite keeps the header
    for rec in records:
        assert rec["inpaint_status"] == "ok"
        with Image.open(rec["fill_outputs"]["inpaint"]) as img:
            assert img.size == (30, 20)
            filled = np.asarray(img)
        with Image.open(rec["source_image_path"]) as src:
            # the identity engine copies the source bit-for-bit
            assert np.array_equal(filled, np.asarray(src))


def test_missing_mask_fails_one_item_not_the_batch(tmp_path):
    manifest = make_manifest(tmp_path, n_plans=3, break_mask_of=1)
    report = inpaint_from_manifest(manifest, "identity")
    assert len(report.ok) == 2
    assert len(report.failed) == 1
    _, records = read_jsonl(manifest)
    statuses = [rec["inpaint_status"] for rec in records]
    assert statuses[0] == "ok" and statuses[2] == "ok"
    assert statuses[1].startswith("failed:")


def test_mask_dimension_mismatch_is_an_item_failure(tmp_path):
    manifest = make_manifest(tmp_path, n_plans=2, wrong_dims_for=0)
    report = inpaint_from_manifest(manifest, "identity")
    assert len(report.ok) == 1
    _, records = read_jsonl(manifest)
    assert "does not match" in records[0]["inpaint_status"]


def test_rle_mask_decoding_matches_hand_layout(tmp_path):
    # 2x2, only (0,0) set, column-major zeros-first: [0, 1, 3]
    decoded = decode_mask_rle(
        json.dumps({"size": [2, 2], "counts": [0, 1, 3]}).encode())
    expected = np.array([[True, False], [False, False]])
    assert np.array_equal(decoded, expected)
    # 3x3 diagonal: runs [0,1,3,1,3,1]
    decoded = decode_mask_rle(
        json.dumps({"size": [3, 3], "counts": [0, 1, 3, 1, 3, 1]}).encode())
    assert np.array_equal(decoded, np.eye(3, dtype=bool))


def test_rle_mask_file_path(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"size": [2, 3], "counts": [6]}))
    mask = read_mask(path, "rle")
    assert mask.shape == (2, 3)
    assert not mask.any()


def test_unknown_engine_rejected():
    with pytest.raises(ModelLoadError):
        load_engine("stable-diffusion-xl")
