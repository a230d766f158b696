"""Synthetic-caption generation for removal plans.

Two built-in methods: deleting the noun-phrase spans that mention the
removed classes from an original caption, or instantiating a photo-style
prompt template from the kept class names. A third method tag exists for
captions produced by an external model; this package never generates
those, it only leaves room for them in the manifest.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from pathlib import Path

from .artifacts import read_jsonl, write_jsonl
from .dataset import CaptionRecord, ClassVocabulary, DatasetBundle, NounPhraseSpan, tokenize
from .errors import (
    EmptyPromptSetError,
    ParseError,
    PreconditionError,
    UnsupportedMethodError,
)
from .matching import MatchMode, WordListMode, match_class_np, span_class_set


class SynthesisMethod(enum.Enum):
    NP_REMOVAL = "np_removal"
    PROMPT = "prompt"
    EXTERNAL_CAPTION = "external_caption"


@dataclass(frozen=True)
class PromptSet:
    """Ordered caption templates, each with one ``{classes}`` slot."""

    templates: tuple[str, ...]

    def __post_init__(self):
        if not self.templates:
            raise EmptyPromptSetError("prompt set has no templates")
        for i, template in enumerate(self.templates):
            if template.count("{classes}") != 1:
                raise ParseError(
                    f"template {i} must contain the placeholder "
                    f"'{{classes}}' exactly once: {template!r}")

    def __len__(self) -> int:
        return len(self.templates)


def load_prompt_templates(path: str | Path) -> PromptSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    templates = tuple(line.strip() for line in lines if line.strip())
    return PromptSet(templates)


@dataclass
class RemovalResult:
    """A caption after span deletion, with surviving spans re-indexed."""

    text: str
    tokens: list[str]
    spans: list[NounPhraseSpan]


def remove_matched_nps(caption: CaptionRecord, removed_classes: set[int],
                       mode: MatchMode) -> RemovalResult | None:
    """Delete every noun-phrase span that mentions a removed class.

    Returns None when the deletion leaves nothing or changes nothing; an
    unchanged caption would still describe the removed object, so it
    cannot pair with the synthetic image.
    """
    doomed = [span for span in caption.np_spans
              if any(match_class_np(c, span, mode) for c in removed_classes)]
    if not doomed:
        return None

    doomed_tokens = set()
    for span in doomed:
        doomed_tokens.update(range(span.token_start, span.token_end))
    keep = [i for i in range(len(caption.tokens)) if i not in doomed_tokens]
    if not keep:
        return None

    new_index = {old: new for new, old in enumerate(keep)}
    tokens = [caption.tokens[i] for i in keep]
    survivors = []
    for span in caption.np_spans:
        if span in doomed:
            continue
        survivors.append(NounPhraseSpan(
            caption_id=span.caption_id,
            token_start=new_index[span.token_start],
            token_end=new_index[span.token_end - 1] + 1,
            surface_text=span.surface_text,
            class_id=span.class_id,
        ))
    return RemovalResult(" ".join(tokens), tokens, survivors)


def join_class_names(names: list[str]) -> str:
    if not names:
        raise PreconditionError("no class names to join")
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def prompt_caption(kept_classes: set[int], vocab: ClassVocabulary,
                   prompts: PromptSet, seed: int,
                   pair_index: int) -> tuple[str, int]:
    """One templated caption naming the kept classes.

    The template is drawn by an RNG keyed on (seed, pair_index) so a
    corpus regenerates byte-identically and no pair depends on how many
    pairs came before it. Returns (caption text, template index).
    """
    if not kept_classes:
        raise PreconditionError("prompt caption needs a nonempty kept set")
    rng = random.Random(f"{seed}:{pair_index}")
    index = rng.randrange(len(prompts))
    names = [vocab.name(c) for c in sorted(kept_classes)]
    return prompts.templates[index].format(classes=join_class_names(names)), index


@dataclass
class SyntheticPair:
    pair_id: str
    image_id: int
    trigger_class: int
    removed_classes: frozenset[int]
    kept_classes: frozenset[int]
    method: SynthesisMethod
    caption: str
    tokens: list[str]
    source_caption_id: int | None = None
    prompt_index: int | None = None
    mask_path: str | None = None

    def __post_init__(self):
        if not self.caption:
            raise PreconditionError("synthetic caption must be nonempty")


def _mentions_removed(tokens: list[str], removed_classes: frozenset[int],
                      mode: MatchMode, vocab: ClassVocabulary) -> bool:
    # Word-level leak scan for captions without span annotations.
    if not isinstance(mode, WordListMode):
        return False
    for class_id in removed_classes:
        aliases = mode.alias_sets[class_id]
        if any(tok in aliases for tok in tokens):
            return True
    return False


def _survivors_leak(result: RemovalResult, removed_classes: frozenset[int],
                    vocab: ClassVocabulary, mode: MatchMode) -> bool:
    for span in result.spans:
        if span_class_set(span, vocab, mode) & removed_classes:
            return True
    return False


def assemble_pairs(plans, bundle: DatasetBundle, method: SynthesisMethod,
                   mode: MatchMode, prompts: PromptSet | None = None,
                   captions_per_image: int = 1, seed: int = 0) -> list[SyntheticPair]:
    """Synthetic pairs for a plan list, in plan order then caption order.

    ``plans`` may be RemovalPlan or PlanSummary objects; only the id and
    class-set fields are used (plus mask_path when present). NP removal
    attempts the first ``captions_per_image`` captions of each plan's
    image, ascending caption id, and skips rejections. Prompt emits one
    caption per plan, skipping any whose wording would still name a
    removed class through a shared alias.
    """
    if not 1 <= captions_per_image <= 5:
        raise PreconditionError(
            f"captions_per_image must be in [1, 5], got {captions_per_image}")
    if method is SynthesisMethod.EXTERNAL_CAPTION:
        raise UnsupportedMethodError(
            "external captions are supplied via the manifest, not generated here")
    if method is SynthesisMethod.PROMPT and prompts is None:
        raise EmptyPromptSetError("prompt method requires a prompt set")

    vocab = bundle.vocabulary
    pairs: list[SyntheticPair] = []
    for plan in plans:
        mask_path = getattr(plan, "mask_path", None)
        common = dict(
            image_id=plan.image_id,
            trigger_class=plan.trigger_class,
            removed_classes=plan.removed_classes,
            kept_classes=plan.kept_classes,
            mask_path=mask_path,
        )
        if method is SynthesisMethod.NP_REMOVAL:
            caption_ids = bundle.images[plan.image_id].caption_ids[:captions_per_image]
            for caption_id in caption_ids:
                caption = bundle.captions[caption_id]
                result = remove_matched_nps(caption, set(plan.removed_classes), mode)
                if result is None:
                    continue
                if _survivors_leak(result, plan.removed_classes, vocab, mode):
                    continue
                pairs.append(SyntheticPair(
                    pair_id=f"p{len(pairs):06d}",
                    method=method,
                    caption=result.text,
                    tokens=result.tokens,
                    source_caption_id=caption_id,
                    **common,
                ))
        else:
            text, index = prompt_caption(
                set(plan.kept_classes), vocab, prompts, seed, len(pairs))
            tokens = tokenize(text)
            if _mentions_removed(tokens, plan.removed_classes, mode, vocab):
                continue
            pairs.append(SyntheticPair(
                pair_id=f"p{len(pairs):06d}",
                method=method,
                caption=text,
                tokens=tokens,
                prompt_index=index,
                **common,
            ))
    return pairs


def pair_record(pair: SyntheticPair, vocab: ClassVocabulary) -> dict:
    rec = {
        "pair_id": pair.pair_id,
        "image_id": pair.image_id,
        "trigger_class": vocab.name(pair.trigger_class),
        "removed_classes": [vocab.name(c) for c in sorted(pair.removed_classes)],
        "kept_classes": [vocab.name(c) for c in sorted(pair.kept_classes)],
        "method": pair.method.value,
        "caption": pair.caption,
        "mask_path": pair.mask_path,
    }
    if pair.source_caption_id is not None:
        rec["source_caption_id"] = pair.source_caption_id
    if pair.prompt_index is not None:
        rec["prompt_index"] = pair.prompt_index
    return rec


def write_pairs(pairs: list[SyntheticPair], bundle: DatasetBundle,
                path: str | Path, header: dict | None = None) -> None:
    write_jsonl(path, [pair_record(p, bundle.vocabulary) for p in pairs], header=header)


def read_pairs(path: str | Path, bundle: DatasetBundle) -> list[SyntheticPair]:
    vocab = bundle.vocabulary
    _, records = read_jsonl(path)
    pairs = []
    for rec in records:
        try:
            pairs.append(SyntheticPair(
                pair_id=rec["pair_id"],
                image_id=rec["image_id"],
                trigger_class=vocab.index(rec["trigger_class"]),
                removed_classes=frozenset(vocab.index(n) for n in rec["removed_classes"]),
                kept_classes=frozenset(vocab.index(n) for n in rec["kept_classes"]),
                method=SynthesisMethod(rec["method"]),
                caption=rec["caption"],
                tokens=tokenize(rec["caption"]),
                source_caption_id=rec.get("source_caption_id"),
                prompt_index=rec.get("prompt_index"),
                mask_path=rec.get("mask_path"),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: malformed pair line: {exc}") from exc
    return pairs


def attach_pair_ids(manifest_path: str | Path, pairs: list[SyntheticPair],
                    bundle: DatasetBundle) -> None:
    """Rewrite a manifest so each plan line lists its synthetic pairs."""
    vocab = bundle.vocabulary
    by_plan: dict[tuple[int, str], list[str]] = {}
    for pair in pairs:
        key = (pair.image_id, vocab.name(pair.trigger_class))
        by_plan.setdefault(key, []).append(pair.pair_id)
    header, records = read_jsonl(manifest_path)
    for rec in records:
        key = (rec["image_id"], rec["trigger_class"])
        rec["synthetic_caption_ids"] = by_plan.get(key, [])
    write_jsonl(manifest_path, records, header=header)
