"""Command-line pipeline driver.

Subcommands: plan, captions, eval, cooccur, sample. Each is a pure
function of the config file plus its input artifacts, so identical
invocations produce byte-identical outputs. Exit codes: 0 ok, 2 parse,
3 validation/bounds, 4 I/O, 5 precondition violation.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from . import captions as captions_mod
from . import embfiles, metrics, planner
from .artifacts import read_jsonl, write_jsonl
from .dataset import (
    ClassVocabulary,
    DatasetBundle,
    ValidationReport,
    load_captions,
    load_instances,
    load_np_chunks,
)
from .errors import DecorrError, ParseError, PreconditionError, RatioOutOfRangeError
from .matching import AnnotatedPairsMode, WordListMode, load_match_table

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_PRECONDITION = 5


def builtin_data_path(name: str) -> Path:
    return Path(str(resources.files("decorr").joinpath("data", name)))


@dataclass
class RunConfig:
    """Parsed config file plus CLI overrides."""

    paths: dict = field(default_factory=dict)
    plan: dict = field(default_factory=dict)
    captions: dict = field(default_factory=dict)
    match: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    seed: int = 0
    synthetic_ratio: float = 1.0
    threads: int = 1
    source_path: str | None = None

    KNOWN_SECTIONS = ("paths", "plan", "captions", "match", "eval",
                      "seed", "synthetic_ratio")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: config must be a JSON object")
        unknown = set(raw) - set(cls.KNOWN_SECTIONS)
        if unknown:
            raise ParseError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = cls(
            paths=dict(raw.get("paths", {})),
            plan=dict(raw.get("plan", {})),
            captions=dict(raw.get("captions", {})),
            match=dict(raw.get("match", {})),
            eval=dict(raw.get("eval", {})),
            seed=int(raw.get("seed", 0)),
            synthetic_ratio=float(raw.get("synthetic_ratio", 1.0)),
            source_path=str(path),
        )
        return cfg

    def path(self, key: str, default: str | None = None) -> Path | None:
        value = self.paths.get(key, default)
        return None if value is None else Path(value)

    def out_dir(self) -> Path:
        return Path(self.paths.get("out_dir", "out"))

    def plan_config(self) -> planner.PlanConfig:
        return planner.PlanConfig(
            alpha1=float(self.plan.get("alpha1", planner.DEFAULT_ALPHA1)),
            alpha2=float(self.plan.get("alpha2", planner.DEFAULT_ALPHA2)),
            alpha3=float(self.plan.get("alpha3", planner.DEFAULT_ALPHA3)),
            strict_eq3_union=bool(self.plan.get("strict_eq3_union", False)),
            blur_sigma=float(self.plan.get("blur_sigma", planner.DEFAULT_BLUR_SIGMA)),
        )

    def fill_modes(self) -> tuple[planner.FillMode, ...]:
        return tuple(planner.FillMode(m) for m in self.plan.get("fill_modes", []))

    def mask_format(self) -> planner.MaskFormat:
        return planner.MaskFormat(self.plan.get("mask_format", "png"))

    def echo(self, command: str) -> dict:
        return {
            "command": command,
            "config": {
                "paths": {k: str(v) for k, v in self.paths.items()},
                "plan": self.plan,
                "captions": self.captions,
                "match": self.match,
                "eval": self.eval,
                "seed": self.seed,
                "synthetic_ratio": self.synthetic_ratio,
            },
        }


def load_bundle(cfg: RunConfig, need_chunks: bool = True) -> DatasetBundle:
    instances = cfg.path("instances")
    captions_path = cfg.path("captions")
    if instances is None or captions_path is None:
        raise PreconditionError("config must set paths.instances and paths.captions")
    report = ValidationReport()
    vocab = ClassVocabulary.from_instances(instances)
    bundle = load_instances(instances, vocab, report=report)
    load_captions(captions_path, bundle, report=report)
    if need_chunks:
        chunks = cfg.path("np_chunks")
        if chunks is not None:
            load_np_chunks(chunks, bundle)
    return bundle


def build_match_mode(cfg: RunConfig, bundle: DatasetBundle):
    mode_name = cfg.match.get("mode", "word_list")
    if mode_name == "annotated":
        return AnnotatedPairsMode()
    if mode_name != "word_list":
        raise ParseError(f"unknown match mode {mode_name!r}")
    table_path = cfg.path("match_table") or builtin_data_path("mscoco_match_table.json")
    table = load_match_table(table_path)
    return WordListMode.build(table, bundle.vocabulary)


def load_prompts(cfg: RunConfig) -> captions_mod.PromptSet:
    path = cfg.path("prompts") or builtin_data_path("prompts.txt")
    return captions_mod.load_prompt_templates(path)


def cmd_plan(cfg: RunConfig, dry_run: bool = False) -> None:
    bundle = load_bundle(cfg, need_chunks=False)
    plan_cfg = cfg.plan_config()
    splits = cfg.plan.get("splits")
    plans = planner.plan_all(bundle, plan_cfg, None if splits is None else set(splits))
    fill_modes = cfg.fill_modes()
    images_dir = cfg.path("images_dir")
    if fill_modes and images_dir is None:
        raise PreconditionError("plan.fill_modes set but paths.images_dir missing")

    out_dir = cfg.out_dir()
    if dry_run:
        print(f"DRY RUN: {len(plans)} plans; would write "
              f"{out_dir / 'manifest.jsonl'} and {out_dir / 'plans.jsonl'}")
        return

    manifest_path = planner.export_masks(
        plans, bundle, out_dir, fmt=cfg.mask_format(), images_dir=images_dir,
        fill_modes=fill_modes, header=cfg.echo("plan"))
    write_jsonl(out_dir / "plans.jsonl",
                [planner.plan_record(p, bundle) for p in plans],
                header=cfg.echo("plan"))

    if fill_modes:
        for plan in plans:
            image = bundle.images[plan.image_id]
            name = image.file_name or f"{plan.image_id}.png"
            with Image.open(Path(images_dir) / name) as img:
                pixels = np.asarray(img.convert("RGB"))
            for mode in fill_modes:
                filled = planner.apply_fill(pixels, plan.mask, mode,
                                            plan_cfg.blur_sigma)
                target = out_dir / "fill" / mode.value / planner.fill_filename(
                    plan.image_id, plan.trigger_class)
                target.parent.mkdir(parents=True, exist_ok=True)
                Image.fromarray(filled).save(target)
    print(f"wrote {len(plans)} plans to {manifest_path}")


def cmd_captions(cfg: RunConfig, dry_run: bool = False) -> None:
    bundle = load_bundle(cfg)
    mode = build_match_mode(cfg, bundle)
    method = captions_mod.SynthesisMethod(cfg.captions.get("method", "np_removal"))
    per_image = int(cfg.captions.get("captions_per_image", 1))
    out_dir = cfg.out_dir()
    manifest_path = out_dir / "manifest.jsonl"
    plans = planner.read_manifest(manifest_path, bundle)
    prompts = load_prompts(cfg) if method is captions_mod.SynthesisMethod.PROMPT else None
    pairs = captions_mod.assemble_pairs(
        plans, bundle, method, mode, prompts=prompts,
        captions_per_image=per_image, seed=cfg.seed)
    if dry_run:
        print(f"DRY RUN: {len(pairs)} pairs from {len(plans)} plans; "
              f"would write {out_dir / 'pairs.jsonl'}")
        return
    captions_mod.write_pairs(pairs, bundle, out_dir / "pairs.jsonl",
                             header=cfg.echo("captions"))
    captions_mod.attach_pair_ids(manifest_path, pairs, bundle)
    print(f"wrote {len(pairs)} pairs to {out_dir / 'pairs.jsonl'}")


def cmd_eval(cfg: RunConfig, args, dry_run: bool = False) -> None:
    bundle = load_bundle(cfg)
    mode = build_match_mode(cfg, bundle)
    query_metas = metrics.load_query_metas(args.query_meta, bundle)

    if args.simm:
        sim = embfiles.read_simm(args.simm)
    else:
        if not (args.queries and args.gallery):
            raise PreconditionError(
                "eval needs either --simm or both --queries and --gallery")
        q = embfiles.read_embd(args.queries)
        g = embfiles.read_embd(args.gallery)
        sim = metrics.cosine_sim(q, g)

    splits = cfg.eval.get("gallery_splits")
    gallery = metrics.build_gallery(bundle, mode,
                                    None if splits is None else set(splits))
    gallery_metas = {str(m.gallery_id): m for m in gallery}
    k_list = [int(k) for k in cfg.eval.get("k_list", list(metrics.DEFAULT_K_LIST))]
    rel_mode = metrics.RelevanceMode(cfg.eval.get("relevance", "strict"))
    norm = metrics.ApNorm(cfg.eval.get("norm", "by_k"))

    out_dir = cfg.out_dir()
    if dry_run:
        print(f"DRY RUN: {len(sim.query_ids)} queries x {len(sim.gallery_ids)} "
              f"gallery items; would write {out_dir / 'report.json'}")
        return
    report = metrics.odmap_at_k(sim, query_metas, gallery_metas,
                                k_list, rel_mode, norm)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not args.simm:
        embfiles.write_simm(out_dir / "scores.simm", sim)
    metrics.write_report_json(report, out_dir / "report.json")
    metrics.write_report_csv(report, out_dir / "report.csv")
    summary = " ".join(f"ODmAP@{k}={report.odmap_at_k[k]:.6f}"
                       for k in sorted(report.odmap_at_k))
    print(f"wrote {out_dir / 'report.json'} ({summary})")


def cmd_cooccur(cfg: RunConfig, dry_run: bool = False) -> None:
    bundle = load_bundle(cfg, need_chunks=False)
    stats = metrics.cooccurrence_stats(bundle)
    out_dir = cfg.out_dir()
    if dry_run:
        print(f"DRY RUN: {stats.n_images} images, {len(stats.class_names)} "
              f"classes; would write {out_dir / 'cooccur.jsonl'}")
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_cooccurrence_report(stats, out_dir / "cooccur.jsonl",
                                      header=cfg.echo("cooccur"))
    print(f"wrote {out_dir / 'cooccur.jsonl'}")


def cmd_sample(cfg: RunConfig, args, dry_run: bool = False) -> None:
    ratio = cfg.synthetic_ratio if args.ratio is None else args.ratio
    if not 0 < ratio <= 1:
        raise RatioOutOfRangeError(f"ratio must be in (0, 1], got {ratio}")
    pairs_path = Path(args.pairs) if args.pairs else cfg.out_dir() / "pairs.jsonl"
    header, records = read_jsonl(pairs_path)
    n_keep = math.ceil(ratio * len(records))
    rng = random.Random(f"{cfg.seed}:sample")
    chosen = sorted(rng.sample(range(len(records)), n_keep))
    out_path = cfg.out_dir() / "pairs_sampled.jsonl"
    if dry_run:
        print(f"DRY RUN: would sample {n_keep}/{len(records)} pairs "
              f"into {out_path}")
        return
    write_jsonl(out_path, [records[i] for i in chosen], header=header)
    print(f"wrote {n_keep}/{len(records)} pairs to {out_path}")


def _global_flags(parser: argparse.ArgumentParser, top_level: bool) -> None:
    # Subcommand copies default to SUPPRESS so they only overwrite the
    # top-level values when actually present after the subcommand.
    def dflt(value):
        return value if top_level else argparse.SUPPRESS

    parser.add_argument("--config", default=dflt(None), help="JSON config file")
    parser.add_argument("--seed", type=int, default=dflt(None),
                        help="override config seed")
    parser.add_argument("--out-dir", default=dflt(None),
                        help="override config paths.out_dir")
    parser.add_argument("--dry-run", action="store_true", default=dflt(False),
                        help="validate inputs and print the plan, write nothing")
    parser.add_argument("--threads", type=int, default=dflt(1),
                        help="worker hint (execution is deterministic regardless)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decorr",
        description="Object-removal dataset synthesis and retrieval evaluation.")
    _global_flags(parser, top_level=True)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in (("plan", "compute removal plans, masks, and fills"),
                       ("captions", "generate synthetic captions for the plans"),
                       ("cooccur", "class co-occurrence statistics")):
        _global_flags(sub.add_parser(name, help=desc), top_level=False)

    p_eval = sub.add_parser("eval", help="score retrieval from EMBD/SIMM files")
    _global_flags(p_eval, top_level=False)
    p_eval.add_argument("--simm", help="similarity matrix file")
    p_eval.add_argument("--queries", help="query embeddings (EMBD)")
    p_eval.add_argument("--gallery", help="gallery embeddings (EMBD)")
    p_eval.add_argument("--query-meta", required=True,
                        help="query metadata JSONL (removed/kept classes)")

    p_sample = sub.add_parser("sample", help="subsample the synthetic pairs")
    _global_flags(p_sample, top_level=False)
    p_sample.add_argument("--pairs", help="pairs JSONL (default out_dir/pairs.jsonl)")
    p_sample.add_argument("--ratio", type=float, help="override synthetic_ratio")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        parser.error("--config is required")
    try:
        cfg = RunConfig.from_file(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out_dir is not None:
            cfg.paths["out_dir"] = args.out_dir
        cfg.threads = max(1, args.threads)

        if args.command == "plan":
            cmd_plan(cfg, dry_run=args.dry_run)
        elif args.command == "captions":
            cmd_captions(cfg, dry_run=args.dry_run)
        elif args.command == "eval":
            cmd_eval(cfg, args, dry_run=args.dry_run)
        elif args.command == "cooccur":
            cmd_cooccur(cfg, dry_run=args.dry_run)
        elif args.command == "sample":
            cmd_sample(cfg, args, dry_run=args.dry_run)
        else:  # pragma: no cover - argparse enforces the choices
            raise PreconditionError(f"unknown command {args.command}")
    except DecorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
