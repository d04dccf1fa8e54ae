"""Command-line entry point: image folder in, EVEC v1 plus manifest out."""

from __future__ import annotations

import argparse
import sys

from .backbones import DEFAULT_MODEL, available_models
from .errors import ExtractionError
from .extract import DECODE_ERROR_MODES, extract_embeddings, manifest_path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-extract",
        description="embed an image folder into an EVEC v1 file",
    )
    parser.add_argument("--input", required=True, help="image folder")
    parser.add_argument("--out", required=True, help="output EVEC path")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help=f"backbone to run (default {DEFAULT_MODEL}; "
        f"available: {', '.join(available_models())})",
    )
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument(
        "--on-decode-error",
        choices=DECODE_ERROR_MODES,
        default="abort",
        help="what to do with undecodable images",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = extract_embeddings(
            args.input,
            args.out,
            model_id=args.model,
            batch_size=args.batch_size,
            on_decode_error=args.on_decode_error,
        )
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {args.out}: n={manifest.image_count} d={manifest.dim} "
        f"classes={manifest.num_classes}"
    )
    print(f"sha256={manifest.sha256}")
    print(f"manifest={manifest_path(args.out)}")
    if manifest.skipped:
        print(f"skipped {len(manifest.skipped)} undecodable image(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
