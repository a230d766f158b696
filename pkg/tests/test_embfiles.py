import struct

import numpy as np
import pytest

from decorr.embfiles import (
    EMBD_MAGIC,
    FORMAT_VERSION,
    SIMM_MAGIC,
    read_embd,
    read_simm,
    write_embd,
    write_simm,
)
from decorr.errors import ParseError, ValidationError
from decorr.metrics import EmbeddingSet, SimilarityMatrix


def test_embd_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    vectors = rng.normal(size=(5, 7)).astype(np.float32)
    ids = ["a", "b", "c", "d", "e"]
    path = tmp_path / "x.embd"
    write_embd(path, EmbeddingSet(ids, vectors))
    again = read_embd(path)
    assert again.ids == ids
    assert again.vectors.dtype == np.float32
    assert np.array_equal(again.vectors, vectors)


def test_embd_unicode_ids(tmp_path):
    path = tmp_path / "u.embd"
    write_embd(path, EmbeddingSet(["café", "犬"], np.ones((2, 3), dtype=np.float32)))
    assert read_embd(path).ids == ["café", "犬"]


def test_embd_exact_byte_layout(tmp_path):
    path = tmp_path / "h.embd"
    vec = np.array([[1.5, -2.0]], dtype=np.float32)
    write_embd(path, EmbeddingSet(["q7"], vec))
    expected = (EMBD_MAGIC
                + struct.pack("<III", FORMAT_VERSION, 1, 2)
                + np.array([1.5, -2.0], dtype="<f4").tobytes()
                + struct.pack("<I", 2) + b"q7")
    assert path.read_bytes() == expected


def test_embd_parse_errors(tmp_path):
    path = tmp_path / "bad.embd"

    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ParseError):
        read_embd(path)

    path.write_bytes(EMBD_MAGIC + struct.pack("<III", 99, 0, 0))
    with pytest.raises(ParseError):
        read_embd(path)

    # header promises more floats than the file holds
    path.write_bytes(EMBD_MAGIC + struct.pack("<III", FORMAT_VERSION, 2, 4)
                     + bytes(8))
    with pytest.raises(ParseError):
        read_embd(path)

    # trailing garbage after the id table
    good = tmp_path / "good.embd"
    write_embd(good, EmbeddingSet(["a"], np.ones((1, 1), dtype=np.float32)))
    path.write_bytes(good.read_bytes() + b"xx")
    with pytest.raises(ParseError):
        read_embd(path)


def test_embd_nan_rejected_on_read(tmp_path):
    path = tmp_path / "nan.embd"
    payload = (EMBD_MAGIC + struct.pack("<III", FORMAT_VERSION, 1, 1)
               + np.array([np.nan], dtype="<f4").tobytes()
               + struct.pack("<I", 1) + b"a")
    path.write_bytes(payload)
    with pytest.raises(ValidationError):
        read_embd(path)


def test_simm_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    scores = rng.normal(size=(3, 4)).astype(np.float32)
    sim = SimilarityMatrix(["q0", "q1", "q2"], ["g0", "g1", "g2", "g3"], scores)
    path = tmp_path / "x.simm"
    write_simm(path, sim)
    again = read_simm(path)
    assert again.query_ids == sim.query_ids
    assert again.gallery_ids == sim.gallery_ids
    assert np.array_equal(again.scores, scores)


def test_simm_header_layout(tmp_path):
    path = tmp_path / "h.simm"
    sim = SimilarityMatrix(["q"], ["g"], np.array([[0.25]], dtype=np.float32))
    write_simm(path, sim)
    raw = path.read_bytes()
    assert raw[:4] == SIMM_MAGIC
    assert struct.unpack("<III", raw[4:16]) == (FORMAT_VERSION, 1, 1)
    assert np.frombuffer(raw[16:20], dtype="<f4")[0] == 0.25


def test_simm_nan_rejected(tmp_path):
    path = tmp_path / "nan.simm"
    payload = (SIMM_MAGIC + struct.pack("<III", FORMAT_VERSION, 1, 1)
               + np.array([np.inf], dtype="<f4").tobytes()
               + struct.pack("<I", 1) + b"q"
               + struct.pack("<I", 1) + b"g")
    path.write_bytes(payload)
    with pytest.raises(ValidationError):
        read_simm(path)
