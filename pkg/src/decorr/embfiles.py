"""Binary carriers for model outputs.

EMBD holds one float32 vector per id; SIMM holds a dense query x gallery
score matrix with both id lists. Both are little-endian with a 4-byte
magic, a u32 version, u32 shape fields, the float payload, then id
tables of u32-length-prefixed UTF-8 strings. Models write these files
offline; nothing in this package runs inference.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .metrics import EmbeddingSet, SimilarityMatrix

EMBD_MAGIC = b"EMBD"
SIMM_MAGIC = b"SIMM"
FORMAT_VERSION = 1


def _pack_ids(ids: list[str]) -> bytes:
    chunks = []
    for item in ids:
        raw = item.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
    return b"".join(chunks)


class _Cursor:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ParseError(f"{self.path}: truncated file "
                             f"(wanted {n} bytes at offset {self.offset})")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def ids(self, count: int) -> list[str]:
        out = []
        for _ in range(count):
            length = self.u32()
            out.append(self.take(length).decode("utf-8"))
        return out

    def done(self) -> None:
        if self.offset != len(self.data):
            raise ParseError(f"{self.path}: {len(self.data) - self.offset} "
                             "trailing bytes after id table")


def _check_header(cur: _Cursor, magic: bytes) -> None:
    got = cur.take(4)
    if got != magic:
        raise ParseError(f"{cur.path}: bad magic {got!r}, expected {magic!r}")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise ParseError(f"{cur.path}: unsupported version {version}")


def write_embd(path: str | Path, embeddings: EmbeddingSet) -> None:
    vectors = np.ascontiguousarray(embeddings.vectors, dtype="<f4")
    with open(path, "wb") as handle:
        handle.write(EMBD_MAGIC)
        handle.write(struct.pack("<III", FORMAT_VERSION,
                                 embeddings.count, embeddings.dim))
        handle.write(vectors.tobytes())
        handle.write(_pack_ids(embeddings.ids))


def read_embd(path: str | Path) -> EmbeddingSet:
    path = Path(path)
    cur = _Cursor(path.read_bytes(), path)
    _check_header(cur, EMBD_MAGIC)
    count = cur.u32()
    dim = cur.u32()
    raw = cur.take(count * dim * 4)
    vectors = np.frombuffer(raw, dtype="<f4").reshape(count, dim).copy()
    ids = cur.ids(count)
    cur.done()
    return EmbeddingSet(ids, vectors)


def write_simm(path: str | Path, sim: SimilarityMatrix) -> None:
    scores = np.ascontiguousarray(sim.scores, dtype="<f4")
    with open(path, "wb") as handle:
        handle.write(SIMM_MAGIC)
        handle.write(struct.pack("<III", FORMAT_VERSION,
                                 len(sim.query_ids), len(sim.gallery_ids)))
        handle.write(scores.tobytes())
        handle.write(_pack_ids(sim.query_ids))
        handle.write(_pack_ids(sim.gallery_ids))


def read_simm(path: str | Path) -> SimilarityMatrix:
    path = Path(path)
    cur = _Cursor(path.read_bytes(), path)
    _check_header(cur, SIMM_MAGIC)
    n_queries = cur.u32()
    n_gallery = cur.u32()
    raw = cur.take(n_queries * n_gallery * 4)
    scores = np.frombuffer(raw, dtype="<f4").reshape(n_queries, n_gallery).copy()
    query_ids = cur.ids(n_queries)
    gallery_ids = cur.ids(n_gallery)
    cur.done()
    return SimilarityMatrix(query_ids, gallery_ids, scores)
