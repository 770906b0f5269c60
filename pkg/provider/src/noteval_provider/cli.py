"""Command line for emitting embedding sidecars."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .backends import BackendError
from .corpus import CorpusError
from .emit import DEFAULT_MODELS, KINDS, ProviderConfig, emit_sidecars


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noteval-provider",
        description="Write embedding sidecar files for every note in a corpus.",
    )
    parser.add_argument(
        "--corpus", required=True, type=Path, help="corpus root directory"
    )
    parser.add_argument(
        "--out", required=True, type=Path, help="output directory for sidecars"
    )
    parser.add_argument(
        "--kinds",
        default=",".join(KINDS),
        help=f"comma-separated sidecar kinds to emit (default: {','.join(KINDS)})",
    )
    parser.add_argument(
        "--stub",
        action="store_true",
        help="use the deterministic hash backend instead of loading models",
    )
    parser.add_argument(
        "--model",
        action="append",
        default=[],
        metavar="KIND=ID",
        help="override the model identifier for one kind (repeatable)",
    )
    parser.add_argument(
        "--model-tokens",
        action="store_true",
        help="emit the model's own subword units instead of the shared core tokens",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    kinds = tuple(k for k in (part.strip() for part in args.kinds.split(",")) if k)
    models = dict(DEFAULT_MODELS)
    for spec in args.model:
        kind, sep, model_id = spec.partition("=")
        if not sep or kind not in KINDS or not model_id:
            print(f"error: bad --model {spec!r}, expected KIND=ID", file=sys.stderr)
            return 2
        models[kind] = model_id
    config = ProviderConfig(
        corpus_root=args.corpus,
        out_root=args.out,
        kinds=kinds,
        models=models,
        stub=args.stub,
        core_tokens=not args.model_tokens,
    )
    try:
        written = emit_sidecars(config)
    except (CorpusError, BackendError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written} sidecar files under {args.out}")
    return 0
