"""Readers/writers for the toolkit's file contracts.

This package talks to the evaluation toolkit only through files, so the
formats are implemented here from their published layout rather than
imported: EMBD and SIMM are little-endian, magic + version 1 + shape
header, float32 payload, then u32-length-prefixed UTF-8 id strings.
JSONL artifacts may begin with a single ``{"header": ...}`` line.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1
EMBD_MAGIC = b"EMBD"
SIMM_MAGIC = b"SIMM"


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    half-written artifact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack_ids(ids) -> bytes:
    chunks = []
    for item in ids:
        raw = str(item).encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)) + raw)
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated ({n} bytes wanted "
                              f"at offset {self.pos})")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def ids(self, count: int) -> list[str]:
        return [self.take(self.u32()).decode("utf-8") for _ in range(count)]

    def done(self) -> None:
        if self.pos != len(self.blob):
            raise FormatError(f"{self.path}: {len(self.blob) - self.pos} "
                              f"trailing bytes")


def write_embd(path: str | Path, ids, vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise FormatError("vectors must be (len(ids), dim)")
    if not np.isfinite(vectors).all():
        raise FormatError("embeddings contain non-finite values")
    header = EMBD_MAGIC + struct.pack("<III", FORMAT_VERSION,
                                      vectors.shape[0], vectors.shape[1])
    atomic_write_bytes(path, header + vectors.tobytes(order="C")
                       + _pack_ids(ids))


def read_embd(path: str | Path) -> tuple[list[str], np.ndarray]:
    reader = _Reader(Path(path).read_bytes(), path)
    if reader.take(4) != EMBD_MAGIC:
        raise FormatError(f"{path}: not an EMBD file")
    if reader.u32() != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version")
    count, dim = reader.u32(), reader.u32()
    vectors = np.frombuffer(reader.take(count * dim * 4),
                            dtype="<f4").reshape(count, dim).copy()
    ids = reader.ids(count)
    reader.done()
    return ids, vectors


def read_simm(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    reader = _Reader(Path(path).read_bytes(), path)
    if reader.take(4) != SIMM_MAGIC:
        raise FormatError(f"{path}: not a SIMM file")
    if reader.u32() != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version")
    n_q, n_g = reader.u32(), reader.u32()
    scores = np.frombuffer(reader.take(n_q * n_g * 4),
                           dtype="<f4").reshape(n_q, n_g).copy()
    query_ids = reader.ids(n_q)
    gallery_ids = reader.ids(n_g)
    reader.done()
    return query_ids, gallery_ids, scores


def read_jsonl(path: str | Path) -> tuple[dict | None, list[dict]]:
    header = None
    records = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{i + 1}: bad JSON: {exc}") from exc
            if i == 0 and isinstance(obj, dict) and set(obj) == {"header"}:
                header = obj["header"]
            else:
                records.append(obj)
    return header, records


def write_jsonl(path: str | Path, records, header: dict | None = None) -> None:
    lines = []
    if header is not None:
        lines.append(json.dumps({"header": header}, sort_keys=True,
                                separators=(",", ":")))
    for rec in records:
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
