"""Command-line entry points: embed-images, embed-captions, inpaint."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import embed, inpaint
from .errors import AdapterError
from .models import load_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decorr-adapter",
        description="Bridge models to the decorr evaluation toolkit's "
                    "file formats.")
    sub = parser.add_subparsers(dest="command", required=True)

    images = sub.add_parser("embed-images",
                            help="encode images into an EMBD file")
    images.add_argument("--manifest", help="planning manifest JSONL")
    images.add_argument("--slot", default="inpaint",
                        help="fill slot to read from the manifest "
                             "(or 'source'; default inpaint)")
    images.add_argument("--images", nargs="*",
                        help="explicit image files (ids = file stems)")
    images.add_argument("--model", default="tiny-random")
    images.add_argument("--batch-size", type=int,
                        default=embed.DEFAULT_BATCH_SIZE)
    images.add_argument("--device", default="cpu")
    images.add_argument("--out", required=True)

    captions = sub.add_parser("embed-captions",
                              help="encode captions into an EMBD file")
    captions.add_argument("--input", required=True,
                          help="captions JSON, pairs JSONL, or id/text JSONL")
    captions.add_argument("--model", default="tiny-random")
    captions.add_argument("--batch-size", type=int,
                          default=embed.DEFAULT_BATCH_SIZE)
    captions.add_argument("--device", default="cpu")
    captions.add_argument("--out", required=True)

    paint = sub.add_parser("inpaint",
                           help="fill the manifest's inpaint slots")
    paint.add_argument("--manifest", required=True)
    paint.add_argument("--model", default="identity")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embed-images":
            if bool(args.manifest) == bool(args.images):
                raise AdapterError(
                    "embed-images needs exactly one of --manifest/--images")
            if args.manifest:
                items = embed.images_from_manifest(args.manifest, args.slot)
            else:
                items = [(Path(p).stem, Path(p)) for p in args.images]
            job = embed.AdapterJob(args.model, Path(args.out),
                                   batch_size=args.batch_size,
                                   device=args.device)
            model = load_model(job.model_id, job.device)
            result = embed.embed_images(items, model, job.output_path,
                                        job.batch_size)
            for item_id, reason in result.skipped:
                print(f"warning: skipped {item_id}: {reason}",
                      file=sys.stderr)
            print(f"wrote {args.out} ({len(result.ids)} vectors, "
                  f"{len(result.skipped)} skipped)")
        elif args.command == "embed-captions":
            items = embed.load_caption_records(args.input)
            job = embed.AdapterJob(args.model, Path(args.out),
                                   batch_size=args.batch_size,
                                   device=args.device)
            model = load_model(job.model_id, job.device)
            result = embed.embed_captions(items, model, job.output_path,
                                          job.batch_size)
            print(f"wrote {args.out} ({len(result.ids)} vectors)")
        else:
            report = inpaint.inpaint_from_manifest(args.manifest, args.model)
            for key, reason in report.failed:
                print(f"warning: {key}: {reason}", file=sys.stderr)
            print(f"inpainted {len(report.ok)} plans, "
                  f"{len(report.failed)} failed")
            if report.failed and not report.ok:
                return 1
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
