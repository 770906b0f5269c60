"""Command-line entry points for the evaluation harness."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import load_corpus, save_corpus
from .fixtures import gen_fixtures
from .reports import correlate, write_report, write_scores_csv
from .scoring import METRIC_NAMES, REFERENCE_CHOICES, score_all
from .server import JudgementStore, TaskServer
from .stats import agreement_summary, aggregate_judgements, judgement_rows
from .stubembed import write_stub_sidecars

log = logging.getLogger(__name__)


def _parse_metrics(raw: str | None) -> list[str] | None:
    if raw is None:
        return None
    names = [part.strip() for part in raw.split(",") if part.strip()]
    return names or None


def _parse_refs(raw: str | None) -> list[str] | None:
    if raw is None:
        return None
    refs = [part.strip() for part in raw.split(",") if part.strip()]
    for ref in refs:
        if ref not in REFERENCE_CHOICES:
            raise ValueError(
                f"unknown reference choice {ref!r}; "
                f"known: {', '.join(REFERENCE_CHOICES)}"
            )
    return refs or None


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out else Path(".")


def cmd_fixtures(args: argparse.Namespace) -> int:
    records = gen_fixtures(args.count, args.seed)
    save_corpus(records, args.corpus)
    print(f"wrote {len(records)} fixture consultations to {args.corpus}")
    if args.sidecars:
        count = write_stub_sidecars(records, args.sidecars)
        print(f"wrote {count} stub sidecars to {args.sidecars}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    records = load_corpus(args.corpus)
    store = JudgementStore(args.corpus, records)
    stored = 0
    for name in args.files:
        if name == "-":
            docs = json.load(sys.stdin)
        else:
            with open(name, encoding="utf-8") as handle:
                docs = json.load(handle)
        if isinstance(docs, dict):
            docs = [docs]
        for doc in docs:
            judgement = store.ingest(doc)
            stored += 1
            log.info(
                "stored judgement %s/%s", judgement.evaluator_id, judgement.note_id
            )
    print(f"ingested {stored} judgements into {args.corpus}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    records = load_corpus(args.corpus)
    result = score_all(
        records,
        sidecar_root=args.sidecars,
        metrics=_parse_metrics(args.metrics),
        include_human_hyp=args.include_human_hyp,
        skip_self_pairs=not args.keep_self_pairs,
        max_mode=args.max_mode,
    )
    refs = _parse_refs(args.refs)
    if refs is not None:
        result.rows = [r for r in result.rows if r.reference in refs]
    paths = write_scores_csv(result, _out_dir(args))
    print(
        f"scored {len(result.rows)} rows ({len(result.gaps)} gaps) -> "
        + ", ".join(str(p) for p in paths)
    )
    return 0


def _pairwise_json(table: dict) -> dict[str, float]:
    return {f"{a}-{b}": value for (a, b), value in table.items()}


def cmd_agreement(args: argparse.Namespace) -> int:
    records = load_corpus(args.corpus)
    summary = agreement_summary(records, ranking=args.ranking)
    doc = {
        key: value
        for key, value in summary.items()
        if key != "pairwise"
    }
    doc["pairwise"] = {
        measure: _pairwise_json(table)
        for measure, table in summary["pairwise"].items()  # type: ignore[union-attr]
    }
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "agreement.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"ranking mode:            {summary['ranking']}")
    print(f"time rank alpha:         {summary['time_alpha']:.3f}")
    print(f"incorrect count alpha:   {summary['incorrect_alpha']:.3f}")
    print(f"omission count alpha:    {summary['omission_alpha']:.3f}")
    print(f"incorrect overlap F1:    {summary['incorrect_overlap']:.3f}")
    print(f"omission overlap F1:     {summary['omission_overlap']:.3f}")
    print(f"wrote {path}")
    return 0


def _run_correlation(args: argparse.Namespace, with_agreement: bool) -> int:
    records = load_corpus(args.corpus)
    result = score_all(
        records,
        sidecar_root=args.sidecars,
        metrics=_parse_metrics(args.metrics),
        include_human_hyp=args.include_human_hyp,
        skip_self_pairs=not args.keep_self_pairs,
        max_mode=args.max_mode,
    )
    aggregates = aggregate_judgements(records)
    report = correlate(result, aggregates, judgement_rows(records))
    agreement = (
        agreement_summary(records, ranking=args.ranking) if with_agreement else None
    )
    paths = write_report(
        report, aggregates, _out_dir(args), agreement=agreement, gaps=result.gaps
    )
    print(f"wrote {len(paths)} report files to {_out_dir(args)}")
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    return _run_correlation(args, with_agreement=False)


def cmd_report(args: argparse.Namespace) -> int:
    return _run_correlation(args, with_agreement=True)


def cmd_serve(args: argparse.Namespace) -> int:
    server = TaskServer(
        args.corpus,
        host=args.host,
        port=args.port,
        assets=args.assets,
        seed=args.seed,
    )
    server.serve_forever()
    return 0


def _add_scoring_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--include-human-hyp",
        action="store_true",
        help="score the human notes as hypotheses too",
    )
    sub.add_argument(
        "--keep-self-pairs",
        action="store_true",
        help="keep hypothesis/reference pairs with identical text",
    )
    sub.add_argument(
        "--max-mode",
        choices=("instance", "type_mean"),
        default="instance",
        help="'max' aggregation over single references or over family means",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noteval",
        description="Evaluation harness for machine-generated consultation notes.",
    )
    parser.add_argument(
        "--log-level",
        default="info",
        choices=("debug", "info", "warning", "error"),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--corpus", required=True, help="corpus root directory")
    common.add_argument("--sidecars", help="embedding sidecar directory")
    common.add_argument(
        "--metrics",
        help="comma-separated metric names (default: all); "
        f"known: {', '.join(METRIC_NAMES)}",
    )
    common.add_argument(
        "--refs",
        help="comma-separated reference choices to keep in score output "
        f"({', '.join(REFERENCE_CHOICES)})",
    )
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory (default: .)")

    sub = parser.add_subparsers(dest="command", required=True)

    p_fixtures = sub.add_parser(
        "fixtures", parents=[common], help="generate a deterministic fixture corpus"
    )
    p_fixtures.add_argument("-n", "--count", type=int, default=3)
    p_fixtures.set_defaults(func=cmd_fixtures)

    p_ingest = sub.add_parser(
        "ingest", parents=[common], help="ingest exported judgement documents"
    )
    p_ingest.add_argument("files", nargs="+", help="JSON files ('-' for stdin)")
    p_ingest.set_defaults(func=cmd_ingest)

    p_score = sub.add_parser(
        "score", parents=[common], help="score notes against their references"
    )
    _add_scoring_flags(p_score)
    p_score.set_defaults(func=cmd_score)

    p_agree = sub.add_parser(
        "agreement", parents=[common], help="inter-evaluator agreement numbers"
    )
    p_agree.add_argument(
        "--ranking", choices=("consultation", "global"), default="consultation"
    )
    p_agree.set_defaults(func=cmd_agreement)

    p_corr = sub.add_parser(
        "correlate", parents=[common], help="correlation tables as CSV"
    )
    _add_scoring_flags(p_corr)
    p_corr.add_argument(
        "--ranking", choices=("consultation", "global"), default="consultation"
    )
    p_corr.set_defaults(func=cmd_correlate)

    p_report = sub.add_parser(
        "report", parents=[common], help="full report incl. agreement summary"
    )
    _add_scoring_flags(p_report)
    p_report.add_argument(
        "--ranking", choices=("consultation", "global"), default="consultation"
    )
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser(
        "serve", parents=[common], help="serve task bundles and ingest judgements"
    )
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8734)
    p_serve.add_argument("--assets", help="directory of built UI assets")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
