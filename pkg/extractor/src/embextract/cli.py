"""Command-line interface: extract embeddings, verify output files."""
from __future__ import annotations

import argparse
import sys

from .embf import EmbfError
from .extract import CHECKPOINTS, ExtractError, ExtractorConfig, extract
from .verify import verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embextract",
        description="Extract pooler-output sentence embeddings into EMBF files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed every manifest row with one encoder")
    p.add_argument("--model", required=True, choices=sorted(CHECKPOINTS))
    p.add_argument("--manifest", required=True, help="CSV with a clean_text column")
    p.add_argument("--out", required=True, help="EMBF output path")
    p.add_argument("--checkpoint", default=None,
                   help="override checkpoint (local dir or hub name)")
    p.add_argument("--revision", default=None, help="pin a checkpoint revision hash")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("verify", help="check an EMBF file against its manifest")
    p.add_argument("embf")
    p.add_argument("manifest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            config = ExtractorConfig(
                model_id=args.model,
                manifest_path=args.manifest,
                output_path=args.out,
                checkpoint=args.checkpoint,
                revision=args.revision,
                batch_size=args.batch_size,
                max_sequence_length=args.max_length,
                device=args.device,
            )
            out = extract(config)
            print(f"wrote {out}")
            return 0
        report = verify(args.embf, args.manifest)
        print(report.summary(), file=sys.stdout if report.ok else sys.stderr)
        return 0 if report.ok else 1
    except (ExtractError, EmbfError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
