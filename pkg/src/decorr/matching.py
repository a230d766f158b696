"""Noun-phrase to object-class matching.

Two mechanisms, selected per dataset: a word-list table (an NP matches a
class when any of its tokens is in the class's alias set) and annotated
(class, noun-phrase) pairs (an NP matches exactly its annotated class).
Matching is token-exact; plural and variant forms are enumerated in the
table rather than stemmed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .dataset import CaptionRecord, ClassVocabulary, NounPhraseSpan, normalize_name
from .errors import EmptyTableError, MissingAnnotationError, ParseError


class MatchTable:
    """Class name -> alias words. The name's own words are always aliases."""

    def __init__(self, aliases: dict[str, set[str]]):
        self._aliases = {normalize_name(k): {a.lower() for a in v}
                         for k, v in aliases.items()}

    def listed_classes(self) -> list[str]:
        return sorted(self._aliases)

    def aliases_for(self, class_name: str) -> frozenset[str]:
        """All alias words for a class: its own constituent words plus any
        listed aliases. Works for classes absent from the table too."""
        name = normalize_name(class_name)
        words = set(name.split())
        words.update(self._aliases.get(name, ()))
        return frozenset(words)

    def with_alias(self, class_name: str, alias: str) -> "MatchTable":
        updated = {k: set(v) for k, v in self._aliases.items()}
        updated.setdefault(normalize_name(class_name), set()).add(alias.lower())
        return MatchTable(updated)


def load_match_table(path: str | Path) -> MatchTable:
    """Load a ``{class_name: [alias, ...]}`` JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    if not doc:
        raise EmptyTableError(f"{path}: match table is empty")
    aliases: dict[str, set[str]] = {}
    for name, words in doc.items():
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            raise ParseError(f"{path}: aliases for {name!r} must be a list of strings")
        for w in words:
            if len(w.split()) != 1:
                raise ParseError(f"{path}: alias {w!r} for {name!r} is not a single token")
        aliases[name] = set(words)
    return MatchTable(aliases)


class MatchMode:
    """Base for the two matching mechanisms."""


@dataclass(frozen=True)
class WordListMode(MatchMode):
    """Token-containment matching against per-class alias sets.

    ``alias_sets[class_id]`` is the frozen alias set for that class,
    resolved once against a vocabulary.
    """

    alias_sets: tuple[frozenset[str], ...]

    @classmethod
    def build(cls, table: MatchTable, vocab: ClassVocabulary) -> "WordListMode":
        return cls(tuple(table.aliases_for(name) for name in vocab))


@dataclass(frozen=True)
class AnnotatedPairsMode(MatchMode):
    """Matching via per-span class annotations (Flickr30k-style data)."""


def match_class_np(class_id: int, np_span: NounPhraseSpan, mode: MatchMode) -> bool:
    """Is this noun phrase related to this class?

    Word-list mode: true iff any token of the NP is in the class's alias
    set. Annotated mode: true iff the span's annotation equals class_id;
    an unannotated span is a data error there.
    """
    if isinstance(mode, WordListMode):
        aliases = mode.alias_sets[class_id]
        return any(tok in aliases for tok in np_span.surface_text.split())
    if isinstance(mode, AnnotatedPairsMode):
        if np_span.class_id is None:
            raise MissingAnnotationError(
                f"caption {np_span.caption_id}: span {np_span.surface_text!r} "
                "has no class annotation")
        return np_span.class_id == class_id
    raise TypeError(f"unknown match mode {mode!r}")


def span_class_set(np_span: NounPhraseSpan, vocab: ClassVocabulary,
                   mode: MatchMode) -> set[int]:
    """Classes a single noun phrase matches."""
    if isinstance(mode, AnnotatedPairsMode):
        if np_span.class_id is None:
            raise MissingAnnotationError(
                f"caption {np_span.caption_id}: span {np_span.surface_text!r} "
                "has no class annotation")
        return {np_span.class_id}
    return {c for c in range(len(vocab)) if match_class_np(c, np_span, mode)}


def caption_class_set(caption: CaptionRecord, vocab: ClassVocabulary,
                      mode: MatchMode) -> set[int]:
    """Classes mentioned by any noun phrase of the caption."""
    classes: set[int] = set()
    for span in caption.np_spans:
        classes |= span_class_set(span, vocab, mode)
    return classes
