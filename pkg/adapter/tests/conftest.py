from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def primary_cli() -> list[str]:
    """The evaluation toolkit's CLI, found like any external tool."""
    exe = shutil.which("decorr")
    if exe:
        return [exe]
    return [sys.executable, "-m", "decorr.cli"]


def run_primary(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run([*primary_cli(), *args],
                          capture_output=True, text=True)


def make_png(path: Path, width: int, height: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(path)


@pytest.fixture(scope="session")
def dataset(tmp_path_factory) -> dict:
    """A small planning-ready dataset with images on disk."""
    root = tmp_path_factory.mktemp("adapter_data")
    images_dir = root / "images"
    images_dir.mkdir()
    make_png(images_dir / "1.png", 200, 200, seed=1)
    make_png(images_dir / "2.png", 100, 100, seed=2)

    instances = {
        "images": [
            {"id": 1, "width": 200, "height": 200, "split": "train"},
            {"id": 2, "width": 100, "height": 100, "split": "train"},
        ],
        "annotations": [
            {"image_id": 1, "bbox": [10, 10, 40, 40], "category_id": 3},
            {"image_id": 1, "bbox": [100, 100, 80, 80], "category_id": 2},
            {"image_id": 1, "bbox": [0, 120, 60, 60], "category_id": 1},
            {"image_id": 2, "bbox": [0, 0, 100, 80], "category_id": 1},
            {"image_id": 2, "bbox": [0, 0, 30, 30], "category_id": 2},
        ],
        "categories": [
            {"id": 1, "name": "person"},
            {"id": 2, "name": "dog"},
            {"id": 3, "name": "frisbee"},
            {"id": 4, "name": "chair"},
        ],
    }
    captions = {"annotations": [
        {"id": 100, "image_id": 1, "caption": "A dog chasing a frisbee."},
        {"id": 101, "image_id": 1, "caption": "A man sits."},
        {"id": 102, "image_id": 2, "caption": "A man with a dog."},
        {"id": 103, "image_id": 2, "caption": "The dog runs."},
    ]}
    chunks = [
        {"caption_id": 100, "spans": [[0, 2], [3, 5]]},
        {"caption_id": 101, "spans": [[0, 2]]},
        {"caption_id": 102, "spans": [[0, 2], [3, 5]]},
        {"caption_id": 103, "spans": [[0, 2]]},
    ]
    (root / "instances.json").write_text(json.dumps(instances))
    (root / "captions.json").write_text(json.dumps(captions))
    with open(root / "chunks.jsonl", "w") as fh:
        for rec in chunks:
            fh.write(json.dumps(rec) + "\n")
    return {
        "root": root,
        "images_dir": images_dir,
        "instances": root / "instances.json",
        "captions": root / "captions.json",
        "chunks": root / "chunks.jsonl",
    }


def write_config(dataset: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {
        "paths": {
            "instances": str(dataset["instances"]),
            "captions": str(dataset["captions"]),
            "np_chunks": str(dataset["chunks"]),
            "images_dir": str(dataset["images_dir"]),
            "out_dir": str(out_dir),
        },
        "eval": {"k_list": [1, 3], "relevance": "strict", "norm": "by_k"},
        "seed": 11,
    }
    path = out_dir / "config.json"
    path.write_text(json.dumps(config))
    return path
