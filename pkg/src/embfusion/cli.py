"""Command-line entry point.

Subcommands: preprocess, fuse, sweep, report, extract-check.
Exit codes: 0 ok, 2 usage/schema errors, 3 alignment errors,
4 every sweep cell failed, 5 empty report.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import report as report_mod
from .errors import (
    AlignmentError,
    ConfigError,
    EmbFusionError,
    FormatError,
    SchemaError,
)
from .fusion import LABEL_TO_METHOD, FusionSpec, fuse_matrix
from .harness import aggregate, load_journal_records, parse_experiment_file, run_experiment
from .store import align_ids, load_manifest, read_embeddings, write_embeddings
from .textprep import PreprocessConfig, preprocess

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ALIGNMENT = 3
EXIT_ALL_FAILED = 4
EXIT_EMPTY_REPORT = 5

_KV_KEYS = ("url_placeholder", "html_placeholder", "user_placeholder")


def _load_kv_config(path) -> dict:
    """Tiny key=value config file: one assignment per line, # comments."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _KV_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip('"')
    return out


def _build_preprocess_config(args) -> PreprocessConfig:
    kv = _load_kv_config(args.config) if args.config else {}
    for key in _KV_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            kv[key] = flag
    return PreprocessConfig(**kv)


def cmd_preprocess(args) -> int:
    cfg = _build_preprocess_config(args)
    with open(args.manifest_in, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{args.manifest_in}: empty file, expected a CSV header")
    header = rows[0]
    if "text" not in header:
        raise SchemaError(f"{args.manifest_in}: no 'text' column in header {header}")
    text_col = header.index("text")
    if "clean_text" in header:
        clean_col = header.index("clean_text")
        out_header = header
    else:
        clean_col = len(header)
        out_header = header + ["clean_text"]

    out_rows = [out_header]
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(
                f"{args.manifest_in}: row {lineno} has {len(row)} fields, "
                f"expected {len(header)}"
            )
        clean = preprocess(row[text_col], cfg)
        row = list(row)
        if clean_col < len(row):
            row[clean_col] = clean
        else:
            row.append(clean)
        out_rows.append(row)

    with open(args.manifest_out, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(out_rows)
    print(f"wrote {args.manifest_out}: {len(out_rows) - 1} rows")
    return EXIT_OK


def cmd_fuse(args) -> int:
    if len(args.inputs) < 2:
        raise ConfigError("need at least two input EMBF files")
    method = LABEL_TO_METHOD[args.method]
    if method == "random_interleave" and args.seed is None:
        raise ConfigError("method 'randomlycombined' requires --seed")
    matrices = [read_embeddings(p) for p in args.inputs]
    ids = [m.model_id for m in matrices]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate model ids across inputs: {ids}")
    first = matrices[0]
    for m in matrices[1:]:
        if set(m.sample_ids) != set(first.sample_ids):
            raise AlignmentError(
                f"{m.model_id!r} covers a different sample set than {first.model_id!r}"
            )
    aligned = align_ids(first.sample_ids, matrices)
    spec = FusionSpec(sources=tuple(ids), method=method, seed=args.seed or 0)
    fused = fuse_matrix(aligned, spec)
    write_embeddings(args.out, fused)
    print(f"wrote {args.out}: {fused.n_samples} x {fused.dim} ({fused.model_id})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = parse_experiment_file(args.spec)
    result = run_experiment(spec, threads=args.threads, progress=print)
    print(f"{result.cached_cells}/{result.total_cells} cached")
    if result.failed_cells:
        print(f"{result.failed_cells} cells failed", file=sys.stderr)
    if result.computed_cells + result.cached_cells == 0:
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_report(args) -> int:
    records = load_journal_records(args.journal)
    finals = [r for r in records if r.kind == "final"]
    if not finals:
        print(f"{args.journal}: no completed results to report", file=sys.stderr)
        return EXIT_EMPTY_REPORT
    rows = aggregate(finals)
    rendered = report_mod.RENDERERS[args.format](rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rendered)
        print(f"wrote {args.out}: {len(rows)} combinations")
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


def cmd_extract_check(args) -> int:
    try:
        matrix = read_embeddings(args.embf)
    except EmbFusionError as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return 1
    if matrix.rows.size and not np.isfinite(matrix.rows).all():
        bad = int(np.argwhere(~np.isfinite(matrix.rows).all(axis=1))[0, 0])
        print(f"FAIL: non-finite values in sample {matrix.sample_ids[bad]!r}", file=sys.stderr)
        return 1
    if args.expect_dim is not None and matrix.dim != args.expect_dim:
        print(f"FAIL: dim {matrix.dim}, expected {args.expect_dim}", file=sys.stderr)
        return 1
    if args.tanh_range and matrix.rows.size:
        outside = np.abs(matrix.rows) >= 1.0
        if outside.any():
            bad = int(np.argwhere(outside.any(axis=1))[0, 0])
            print(
                f"FAIL: values outside (-1, 1) in sample {matrix.sample_ids[bad]!r}",
                file=sys.stderr,
            )
            return 1
    if args.manifest:
        manifest = load_manifest(args.manifest)
        expected = [r.id for r in manifest.records]
        if matrix.sample_ids != expected:
            for got, want in zip(matrix.sample_ids, expected):
                if got != want:
                    print(f"FAIL: id {got!r} where manifest has {want!r}", file=sys.stderr)
                    return EXIT_ALIGNMENT
            print(
                f"FAIL: {len(matrix.sample_ids)} rows for {len(expected)} manifest entries",
                file=sys.stderr,
            )
            return EXIT_ALIGNMENT
    print(f"OK: {args.embf} model={matrix.model_id} count={matrix.n_samples} dim={matrix.dim}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for seeded operations")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for the sweep")
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="key=value config file (preprocess placeholders)")

    parser = argparse.ArgumentParser(
        prog="embfusion",
        description="Fuse sentence embeddings from multiple encoders and "
        "benchmark MLP classifiers over the combinations.",
        parents=[common],
    )
    parser.set_defaults(seed=None, threads=1, config=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common],
                       help="clean manifest text into a clean_text column")
    p.add_argument("manifest_in")
    p.add_argument("manifest_out")
    p.add_argument("--url-placeholder", dest="url_placeholder")
    p.add_argument("--html-placeholder", dest="html_placeholder")
    p.add_argument("--user-placeholder", dest="user_placeholder")
    p.set_defaults(func=cmd_preprocess, url_placeholder=None, html_placeholder=None,
                   user_placeholder=None)

    p = sub.add_parser("fuse", parents=[common], help="combine embedding files")
    p.add_argument("inputs", nargs="+", help="two or more EMBF files")
    p.add_argument("--method", required=True,
                   choices=("added", "multiplied", "concat", "interleaved",
                            "randomlycombined"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("sweep", parents=[common], help="run or resume an experiment sweep")
    p.add_argument("spec", help="JSON experiment spec")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="summarize a sweep journal")
    p.add_argument("journal")
    p.add_argument("--format", choices=("csv", "md", "svg"), default="md")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("extract-check", parents=[common],
                       help="validate an EMBF file, optionally against a manifest")
    p.add_argument("embf")
    p.add_argument("--manifest")
    p.add_argument("--expect-dim", type=int, default=None)
    p.add_argument("--tanh-range", action="store_true")
    p.set_defaults(func=cmd_extract_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALIGNMENT
    except (SchemaError, ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmbFusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
