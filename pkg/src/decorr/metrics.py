"""Retrieval metrics over external embeddings or similarity matrices.

Covers plain R@k / mAP@k against ground-truth caption ids and the
removal-aware variant: a retrieved caption only counts as correct if it
mentions none of the removed classes (strictly, it must also mention
every kept class; leniently, at least one). Gallery captions are drawn
from all splits by default, so distractors include training data.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artifacts import read_jsonl, write_jsonl
from .dataset import DatasetBundle
from .errors import (
    DimensionMismatchError,
    EmptyGalleryError,
    EmptyRelevantSetError,
    ParseError,
    PreconditionError,
    ValidationError,
    ZeroNormError,
)
from .matching import MatchMode, caption_class_set

DEFAULT_K_LIST = (1, 5, 10)


class RelevanceMode(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class ApNorm(enum.Enum):
    BY_K = "by_k"
    BY_HITS = "by_hits"


@dataclass
class EmbeddingSet:
    ids: list[str]
    vectors: np.ndarray  # (count, dim) float32

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise DimensionMismatchError(
                f"expected (count, dim) vectors, got shape {self.vectors.shape}")
        if len(self.ids) != self.vectors.shape[0]:
            raise DimensionMismatchError(
                f"{len(self.ids)} ids for {self.vectors.shape[0]} vectors")
        if not np.isfinite(self.vectors).all():
            raise ValidationError("embedding vectors contain NaN or Inf")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("duplicate embedding ids")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class SimilarityMatrix:
    query_ids: list[str]
    gallery_ids: list[str]
    scores: np.ndarray  # (n_queries, n_gallery) float32

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float32)
        if self.scores.ndim != 2:
            raise DimensionMismatchError(
                f"expected 2-D scores, got shape {self.scores.shape}")
        if self.scores.shape != (len(self.query_ids), len(self.gallery_ids)):
            raise DimensionMismatchError(
                f"scores {self.scores.shape} vs {len(self.query_ids)} queries "
                f"x {len(self.gallery_ids)} gallery items")
        if not np.isfinite(self.scores).all():
            raise ValidationError("similarity scores contain NaN or Inf")


@dataclass(frozen=True)
class QueryMeta:
    query_id: str
    removed_classes: frozenset[int]
    kept_classes: frozenset[int]
    relevant_ids: frozenset[str] | None = None

    def __post_init__(self):
        if self.removed_classes & self.kept_classes:
            raise PreconditionError(
                f"query {self.query_id}: removed and kept sets overlap")
        if not self.kept_classes:
            raise PreconditionError(f"query {self.query_id}: empty kept set")


@dataclass(frozen=True)
class GalleryMeta:
    gallery_id: int
    class_set: frozenset[int]
    split: str | None = None


@dataclass
class MetricReport:
    config: dict
    recall_at_k: dict[int, float] = field(default_factory=dict)
    map_at_k: dict[int, float] = field(default_factory=dict)
    odmap_at_k: dict[int, float] = field(default_factory=dict)
    per_query_ap: dict[int, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        for table in (self.recall_at_k, self.map_at_k, self.odmap_at_k):
            for value in table.values():
                if not 0.0 <= value <= 1.0:
                    raise ValidationError(f"metric value {value} outside [0, 1]")
        return {
            "config": self.config,
            "recall_at_k": {str(k): v for k, v in sorted(self.recall_at_k.items())},
            "map_at_k": {str(k): v for k, v in sorted(self.map_at_k.items())},
            "odmap_at_k": {str(k): v for k, v in sorted(self.odmap_at_k.items())},
            "per_query_ap": {
                str(k): dict(sorted(queries.items()))
                for k, queries in sorted(self.per_query_ap.items())
            },
        }


def cosine_sim(queries: EmbeddingSet, gallery: EmbeddingSet) -> SimilarityMatrix:
    """Exhaustive cosine scores, float64 inside, float32 out."""
    if queries.dim != gallery.dim:
        raise DimensionMismatchError(
            f"query dim {queries.dim} != gallery dim {gallery.dim}")
    q = queries.vectors.astype(np.float64)
    g = gallery.vectors.astype(np.float64)
    q_norm = np.linalg.norm(q, axis=1)
    g_norm = np.linalg.norm(g, axis=1)
    for name, norms in (("query", q_norm), ("gallery", g_norm)):
        if (norms == 0).any():
            row = int(np.argmax(norms == 0))
            raise ZeroNormError(f"{name} vector {row} has zero norm")
    scores = (q / q_norm[:, None]) @ (g / g_norm[:, None]).T
    return SimilarityMatrix(queries.ids, gallery.ids,
                            scores.astype(np.float32))


def rank(sim: SimilarityMatrix) -> np.ndarray:
    """Per-query gallery order: descending score, ties by ascending index."""
    return np.argsort(-sim.scores, axis=1, kind="stable")


def recall_at_k(sim: SimilarityMatrix, relevant: dict[str, frozenset[str] | set[str]],
                k: int, rankings: np.ndarray | None = None) -> float:
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    if rankings is None:
        rankings = rank(sim)
    hits = 0
    for i, query_id in enumerate(sim.query_ids):
        rel = relevant.get(query_id)
        if not rel:
            raise EmptyRelevantSetError(f"query {query_id} has no relevant ids")
        top = {sim.gallery_ids[j] for j in rankings[i, :k]}
        hits += bool(top & set(rel))
    return hits / len(sim.query_ids)


def od_relevance(query: QueryMeta, gallery_item: GalleryMeta,
                 mode: RelevanceMode = RelevanceMode.STRICT) -> bool:
    if gallery_item.class_set & query.removed_classes:
        return False
    if mode is RelevanceMode.STRICT:
        return query.kept_classes <= gallery_item.class_set
    return bool(gallery_item.class_set & query.kept_classes)


def ap_at_k(rel_flags, k: int, norm: ApNorm = ApNorm.BY_K) -> float:
    """Average precision over the top-k flags.

    ByK divides the precision sum by k (unretrieved tail counts against
    the query); ByHits divides by the number of hits actually in the
    top-k, or 1 if there are none.
    """
    flags = list(rel_flags)
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    if len(flags) > k:
        raise PreconditionError(f"{len(flags)} flags for k={k}")
    total = 0.0
    seen = 0
    for i, flag in enumerate(flags, start=1):
        if flag:
            seen += 1
            total += seen / i
    if norm is ApNorm.BY_K:
        return total / k
    return total / max(1, seen)


def odmap_at_k(sim: SimilarityMatrix, query_metas: dict[str, QueryMeta],
               gallery_metas: dict[str, GalleryMeta] | dict[int, GalleryMeta],
               k_list=DEFAULT_K_LIST,
               rel_mode: RelevanceMode = RelevanceMode.STRICT,
               norm: ApNorm = ApNorm.BY_K) -> MetricReport:
    """Full report: removal-aware mAP per k, plus plain R@k / mAP@k when
    the query metadata carries ground-truth relevant ids."""
    k_list = sorted(set(k_list))
    if not k_list or k_list[0] < 1:
        raise PreconditionError(f"bad k list {k_list}")
    gallery_lookup = {str(key): meta for key, meta in gallery_metas.items()}
    for gid in sim.gallery_ids:
        if gid not in gallery_lookup:
            raise ValidationError(f"gallery id {gid!r} has no metadata")
    for qid in sim.query_ids:
        if qid not in query_metas:
            raise ValidationError(f"query id {qid!r} has no metadata")

    rankings = rank(sim)
    max_k = min(k_list[-1], len(sim.gallery_ids))
    report = MetricReport(config={
        "k_list": k_list,
        "relevance_mode": rel_mode.value,
        "norm": norm.value,
        "n_queries": len(sim.query_ids),
        "n_gallery": len(sim.gallery_ids),
    })

    flags_by_query: dict[str, list[bool]] = {}
    for i, query_id in enumerate(sim.query_ids):
        qmeta = query_metas[query_id]
        flags_by_query[query_id] = [
            od_relevance(qmeta, gallery_lookup[sim.gallery_ids[j]], rel_mode)
            for j in rankings[i, :max_k]
        ]
    for k in k_list:
        per_query = {
            query_id: ap_at_k(flags[:min(k, max_k)], k, norm)
            for query_id, flags in flags_by_query.items()
        }
        report.per_query_ap[k] = per_query
        report.odmap_at_k[k] = sum(per_query[q] for q in sorted(per_query)) / len(per_query)

    relevant = {qid: meta.relevant_ids for qid, meta in query_metas.items()}
    have_relevant = [bool(relevant.get(qid)) for qid in sim.query_ids]
    if all(have_relevant):
        for k in k_list:
            report.recall_at_k[k] = recall_at_k(sim, relevant, k, rankings)
            ap_sum = 0.0
            for i, query_id in enumerate(sim.query_ids):
                rel = relevant[query_id]
                flags = [sim.gallery_ids[j] in rel
                         for j in rankings[i, :min(k, max_k)]]
                ap_sum += ap_at_k(flags, k, norm)
            report.map_at_k[k] = ap_sum / len(sim.query_ids)
    elif any(have_relevant):
        raise EmptyRelevantSetError(
            "some queries carry relevant ids and some do not; "
            "provide them for all queries or none")
    return report


def build_gallery(bundle: DatasetBundle, mode: MatchMode,
                  splits: set[str] | None = None) -> list[GalleryMeta]:
    """Caption metadata for the ranking pool, ascending caption id.

    None means every split; an explicitly empty split set is an error
    because metrics over an empty gallery are undefined.
    """
    if splits is not None and not splits:
        raise EmptyGalleryError("no splits requested for the gallery")
    vocab = bundle.vocabulary
    metas = []
    for caption_id in sorted(bundle.captions):
        caption = bundle.captions[caption_id]
        split = bundle.split_of(caption.image_id)
        if splits is not None and split not in splits:
            continue
        metas.append(GalleryMeta(
            gallery_id=caption_id,
            class_set=frozenset(caption_class_set(caption, vocab, mode)),
            split=split,
        ))
    if not metas:
        raise EmptyGalleryError("gallery is empty for the requested splits")
    return metas


@dataclass
class CooccurrenceStats:
    class_names: list[str]
    counts: np.ndarray  # (C, C) int64; diagonal = per-class image counts
    lift: np.ndarray  # (C, C) float64
    n_images: int

    def top_pairs(self, limit: int = 20) -> list[tuple[str, str, int, float]]:
        n = len(self.class_names)
        pairs = [(self.class_names[a], self.class_names[b],
                  int(self.counts[a, b]), float(self.lift[a, b]))
                 for a in range(n) for b in range(a + 1, n)]
        pairs.sort(key=lambda p: (-p[2], -p[3], p[0], p[1]))
        return pairs[:limit]


def cooccurrence_stats(bundle: DatasetBundle) -> CooccurrenceStats:
    """Image-level class co-presence counts and smoothed lift scores.

    lift(a, b) = P(a, b) / (P(a) P(b)) where each probability uses the
    count plus one over the image count plus one, so absent classes get
    a finite baseline instead of a division by zero.
    """
    names = bundle.vocabulary.names()
    n_classes = len(names)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for image in bundle.images.values():
        present = sorted(image.class_ids())
        for a in present:
            counts[a, a] += 1
        for ai, a in enumerate(present):
            for b in present[ai + 1:]:
                counts[a, b] += 1
                counts[b, a] += 1
    n_images = len(bundle.images)
    smoothed = (counts + 1).astype(np.float64) / (n_images + 1)
    marginals = np.diag(smoothed)
    lift = smoothed / np.outer(marginals, marginals)
    return CooccurrenceStats(names, counts, lift, n_images)


def load_query_metas(path: str | Path, bundle: DatasetBundle) -> dict[str, QueryMeta]:
    """Query metadata JSONL → id-keyed metas (insertion order = file order)."""
    vocab = bundle.vocabulary
    _, records = read_jsonl(path)
    metas: dict[str, QueryMeta] = {}
    for rec in records:
        try:
            relevant = rec.get("relevant_ids")
            metas[rec["query_id"]] = QueryMeta(
                query_id=rec["query_id"],
                removed_classes=frozenset(vocab.index(n) for n in rec["removed_classes"]),
                kept_classes=frozenset(vocab.index(n) for n in rec["kept_classes"]),
                relevant_ids=None if relevant is None else frozenset(str(x) for x in relevant),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed query meta line: {exc}") from exc
    return metas


def write_report_json(report: MetricReport, path: str | Path) -> None:
    payload = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def write_report_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "k", "value"])
        for name, table in (("recall_at_k", report.recall_at_k),
                            ("map_at_k", report.map_at_k),
                            ("odmap_at_k", report.odmap_at_k)):
            for k in sorted(table):
                writer.writerow([name, k, repr(table[k])])


def write_cooccurrence_report(stats: CooccurrenceStats, path: str | Path,
                              header: dict | None = None, top: int = 50) -> None:
    records = [
        {"class_a": a, "class_b": b, "count": count, "lift": lift}
        for a, b, count, lift in stats.top_pairs(top)
    ]
    meta = {"n_images": stats.n_images, "n_classes": len(stats.class_names)}
    if header:
        meta.update(header)
    write_jsonl(path, records, header=meta)
