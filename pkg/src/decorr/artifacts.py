"""JSONL artifact helpers.

Every JSONL artifact the toolkit writes starts with a single header line
``{"header": {...}}`` echoing the run configuration, followed by one JSON
object per record. Readers skip the header.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ParseError


def dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str | Path, records: list[dict],
                header: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(dump_line({"header": header}) + "\n")
        for rec in records:
            fh.write(dump_line(rec) + "\n")


def read_jsonl(path: str | Path) -> tuple[dict | None, list[dict]]:
    """Returns (header or None, records)."""
    header = None
    records: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if lineno == 1 and isinstance(obj, dict) and set(obj) == {"header"}:
                header = obj["header"]
            else:
                records.append(obj)
    return header, records
