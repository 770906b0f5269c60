"""Correlation tables and deterministic report files.

Builds the criteria-vs-criteria table, the metric-vs-criterion tables
(one column per criterion/reference combination), and metric-vs-metric
matrices, then renders them as CSV plus a readable text summary.
Similarity metrics are sign-inverted at render time only; stored
coefficients are always raw.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .scoring import (
    HIGHER_BETTER,
    MetricScoreRow,
    ScoreGap,
    ScoreResult,
)
from .stats import (
    CorrelationResult,
    CriterionRow,
    JudgementRow,
    StatsError,
    group_means,
    pearson,
    spearman,
)

log = logging.getLogger(__name__)

CRITERIA = ("time", "incorrect", "omission", "combined", "length")
CRITERION_LABELS = {
    "time": "Post-edit times",
    "incorrect": "Incorrect",
    "omission": "Omissions",
    "combined": "Inc+Omi",
    "length": "Note length",
}
CRITERIA_PAIRS = (
    ("time", "incorrect"),
    ("time", "omission"),
    ("time", "combined"),
    ("time", "length"),
    ("incorrect", "omission"),
    ("incorrect", "length"),
    ("omission", "length"),
)

# Metric-table columns: criterion paired with a reference choice.
METRIC_COLUMNS = (
    ("time", "human"),
    ("time", "edited"),
    ("time", "eval"),
    ("time", "avg"),
    ("time", "max"),
    ("combined", "avg"),
    ("combined", "max"),
    ("incorrect", "avg"),
    ("incorrect", "max"),
    ("omission", "avg"),
    ("omission", "max"),
)
_COLUMN_SHORT = {"time": "time", "combined": "inc_omi", "incorrect": "incorrect",
                 "omission": "omission"}


def column_label(criterion: str, reference: str) -> str:
    return f"{_COLUMN_SHORT[criterion]}_{reference}"


METHODS = ("pearson", "spearman")
_CORR_FNS = {"pearson": pearson, "spearman": spearman}


@dataclass
class CorrelationReport:
    criteria_pairs: tuple[tuple[str, str], ...]
    criteria: dict[tuple[str, str], dict[str, CorrelationResult | None]]
    metrics: list[str]
    columns: tuple[tuple[str, str], ...]
    metric_criterion: dict[str, dict[str, dict[str, CorrelationResult | None]]]
    metric_matrix: dict[tuple[str, str], dict[tuple[str, str], CorrelationResult | None]]
    polarity: dict[str, str]
    criteria_level: str  # "judgement" or "note"
    criteria_n: int
    degenerate: list[str] = field(default_factory=list)

    def metric_cell(
        self, method: str, metric: str, criterion: str, reference: str
    ) -> CorrelationResult | None:
        return self.metric_criterion[method][metric][column_label(criterion, reference)]

    def displayed_coefficient(
        self, method: str, metric: str, criterion: str, reference: str
    ) -> float | None:
        """Raw coefficient, sign-inverted for similarity metrics."""
        cell = self.metric_cell(method, metric, criterion, reference)
        if cell is None:
            return None
        if self.polarity.get(metric) == HIGHER_BETTER:
            return -cell.coefficient
        return cell.coefficient


def _criteria_vector(rows, key: str) -> list[float]:
    return [float(getattr(r, key)) for r in rows]


def _safe_corr(
    method: str, x: Sequence[float], y: Sequence[float], where: str,
    degenerate: list[str],
) -> CorrelationResult | None:
    if len(x) < 3:
        degenerate.append(f"{where}: only {len(x)} paired observations")
        return None
    try:
        return _CORR_FNS[method](x, y)
    except StatsError as exc:
        degenerate.append(f"{where}: {exc}")
        return None


def correlate(
    score: ScoreResult | Sequence[MetricScoreRow],
    aggregates: Sequence[CriterionRow],
    judgements: Sequence[JudgementRow] | None = None,
) -> CorrelationReport:
    """Assemble every correlation table from scores and criteria rows.

    Criteria-vs-criteria cells use individual judgement rows when given
    (each evaluator's numbers count separately); metric cells always use
    the per-note aggregated criteria.
    """
    rows = score.rows if isinstance(score, ScoreResult) else list(score)
    degenerate: list[str] = []

    crit_rows: Sequence[JudgementRow] | Sequence[CriterionRow]
    if judgements is not None:
        crit_rows = list(judgements)
        criteria_level = "judgement"
    else:
        crit_rows = list(aggregates)
        criteria_level = "note"
    criteria: dict[tuple[str, str], dict[str, CorrelationResult | None]] = {}
    for c1, c2 in CRITERIA_PAIRS:
        x = _criteria_vector(crit_rows, c1)
        y = _criteria_vector(crit_rows, c2)
        criteria[(c1, c2)] = {
            m: _safe_corr(m, x, y, f"criteria {c1}/{c2} {m}", degenerate)
            for m in METHODS
        }

    # scores indexed for the note-level joins
    by_metric_ref: dict[tuple[str, str], dict[str, float]] = {}
    metrics: list[str] = []
    polarity: dict[str, str] = {}
    for row in rows:
        if row.metric not in polarity:
            metrics.append(row.metric)
            polarity[row.metric] = row.polarity
        by_metric_ref.setdefault((row.metric, row.reference), {})[row.note_id] = (
            row.value
        )
    crit_by_note = {r.note_id: r for r in aggregates}

    metric_criterion: dict[str, dict[str, dict[str, CorrelationResult | None]]] = {
        m: {} for m in METHODS
    }
    for metric in metrics:
        for method in METHODS:
            metric_criterion[method][metric] = {}
        for criterion, reference in METRIC_COLUMNS:
            label = column_label(criterion, reference)
            scores_map = by_metric_ref.get((metric, reference), {})
            xs: list[float] = []
            ys: list[float] = []
            for agg in aggregates:
                value = scores_map.get(agg.note_id)
                if value is None:
                    continue
                xs.append(value)
                ys.append(float(getattr(agg, criterion)))
            for method in METHODS:
                metric_criterion[method][metric][label] = _safe_corr(
                    method, xs, ys, f"{metric} {label} {method}", degenerate
                )

    metric_matrix: dict[tuple[str, str], dict[tuple[str, str], CorrelationResult | None]] = {}
    for aggregation in ("avg", "max"):
        note_order = [
            agg.note_id
            for agg in aggregates
            if all(
                agg.note_id in by_metric_ref.get((m, aggregation), {})
                for m in metrics
            )
        ]
        vectors = {
            m: [by_metric_ref[(m, aggregation)][nid] for nid in note_order]
            for m in metrics
        } if metrics else {}
        for method in METHODS:
            table: dict[tuple[str, str], CorrelationResult | None] = {}
            for m1 in metrics:
                for m2 in metrics:
                    if (m2, m1) in table:
                        table[(m1, m2)] = table[(m2, m1)]
                        continue
                    table[(m1, m2)] = _safe_corr(
                        method, vectors[m1], vectors[m2],
                        f"matrix {aggregation} {m1}/{m2} {method}", degenerate,
                    )
            metric_matrix[(aggregation, method)] = table

    if degenerate:
        log.warning("%d degenerate correlation cells", len(degenerate))
    return CorrelationReport(
        criteria_pairs=CRITERIA_PAIRS,
        criteria=criteria,
        metrics=metrics,
        columns=METRIC_COLUMNS,
        metric_criterion=metric_criterion,
        metric_matrix=metric_matrix,
        polarity=polarity,
        criteria_level=criteria_level,
        criteria_n=len(crit_rows),
        degenerate=degenerate,
    )


def significance_marker(p_value: float) -> str:
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return "ns"


def _fmt(value: float, places: int = 3) -> str:
    text = f"{value:.{places}f}"
    if text == f"-0.{'0' * places}":
        text = text[1:]
    return text


def _cell(result: CorrelationResult | None, invert: bool = False) -> str:
    if result is None:
        return "NA"
    coef = -result.coefficient if invert else result.coefficient
    return f"{_fmt(coef)}{significance_marker(result.p_value)}"


def _write(path: Path, lines: Sequence[str]) -> None:
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def _criteria_csv(report: CorrelationReport) -> list[str]:
    lines = [
        "criterion_1,criterion_2,pearson,pearson_p,pearson_sig,"
        "spearman,spearman_p,spearman_sig,n"
    ]
    for c1, c2 in report.criteria_pairs:
        cells = report.criteria[(c1, c2)]
        parts = [CRITERION_LABELS[c1], CRITERION_LABELS[c2]]
        n_obs = 0
        for method in METHODS:
            result = cells[method]
            if result is None:
                parts.extend(["NA", "NA", "NA"])
            else:
                parts.extend(
                    [
                        _fmt(result.coefficient),
                        f"{result.p_value:.3g}",
                        significance_marker(result.p_value),
                    ]
                )
                n_obs = result.n
        parts.append(str(n_obs))
        lines.append(",".join(parts))
    return lines


def _metric_corr_csv(report: CorrelationReport, method: str) -> list[str]:
    header = ["metric", "polarity"] + [column_label(c, r) for c, r in report.columns]
    lines = [",".join(header)]
    for metric in report.metrics:
        invert = report.polarity.get(metric) == HIGHER_BETTER
        parts = [metric, report.polarity.get(metric, "")]
        for criterion, reference in report.columns:
            result = report.metric_cell(method, metric, criterion, reference)
            parts.append(_cell(result, invert=invert))
        lines.append(",".join(parts))
    return lines


def _metric_matrix_csv(
    report: CorrelationReport, aggregation: str, method: str
) -> list[str]:
    lines = [",".join(["metric"] + report.metrics)]
    table = report.metric_matrix.get((aggregation, method), {})
    for m1 in report.metrics:
        parts = [m1]
        for m2 in report.metrics:
            result = table.get((m1, m2))
            parts.append("NA" if result is None else _fmt(result.coefficient))
        lines.append(",".join(parts))
    return lines


def _aggregates_csv(aggregates: Sequence[CriterionRow]) -> list[str]:
    lines = [
        "consultation_id,note_id,role,time,incorrect,omission,combined,"
        "length,n_judgements"
    ]
    for row in aggregates:
        lines.append(
            ",".join(
                [
                    row.consultation_id,
                    row.note_id,
                    row.role,
                    _fmt(row.time, 4),
                    _fmt(row.incorrect, 4),
                    _fmt(row.omission, 4),
                    _fmt(row.combined, 4),
                    str(row.length),
                    str(row.n_judgements),
                ]
            )
        )
    return lines


def _pair_label(pair: tuple[str, str]) -> str:
    return f"{pair[0]}-{pair[1]}"


def _summary_text(
    report: CorrelationReport,
    aggregates: Sequence[CriterionRow],
    agreement: Mapping[str, object] | None,
    gaps: Sequence[ScoreGap],
) -> list[str]:
    lines: list[str] = ["Evaluation summary", "=================="]
    means = group_means(aggregates)
    lines.append("")
    lines.append("Group means (per-note averages over evaluators):")
    lines.append(
        "  role       time(s)  incorrect  omissions  combined  length  notes"
    )
    for role, row in means.items():
        lines.append(
            f"  {role:<9}  {row['time']:7.1f}  {row['incorrect']:9.2f}"
            f"  {row['omission']:9.2f}  {row['combined']:8.2f}"
            f"  {row['length']:6.1f}  {int(row['notes']):5d}"
        )
    if agreement is not None:
        lines.append("")
        lines.append(f"Inter-evaluator agreement (ranking={agreement['ranking']}):")
        lines.append(f"  post-edit time rank alpha (ordinal): {agreement['time_alpha']:.3f}")
        lines.append(f"  incorrect count alpha (interval):    {agreement['incorrect_alpha']:.3f}")
        lines.append(f"  omission count alpha (interval):     {agreement['omission_alpha']:.3f}")
        lines.append(f"  incorrect span overlap F1:           {agreement['incorrect_overlap']:.3f}")
        lines.append(f"  omission span overlap F1:            {agreement['omission_overlap']:.3f}")
        pairwise = agreement.get("pairwise")
        if isinstance(pairwise, Mapping):
            measures = list(pairwise)
            pairs = sorted(
                {p for table in pairwise.values() for p in table}
            )
            lines.append("")
            lines.append("  pair        " + "  ".join(f"{m:>17}" for m in measures))
            for pair in pairs:
                cells = "  ".join(
                    f"{pairwise[m].get(pair, float('nan')):17.3f}" for m in measures
                )
                lines.append(f"  {_pair_label(pair):<11} {cells}")
    lines.append("")
    lines.append(
        f"Criteria correlations ({report.criteria_level} level, "
        f"n={report.criteria_n}):"
    )
    for c1, c2 in report.criteria_pairs:
        cells = report.criteria[(c1, c2)]
        rendered = []
        for method in METHODS:
            result = cells[method]
            rendered.append(
                f"{method}={_cell(result)}" if result else f"{method}=NA"
            )
        lines.append(
            f"  {CRITERION_LABELS[c1]:<16} vs {CRITERION_LABELS[c2]:<12} "
            + "  ".join(rendered)
        )
    lines.append("")
    lines.append("Metric correlations (Spearman, sign-adjusted for display):")
    header = f"  {'metric':<17}" + "".join(
        f"{column_label(c, r):>14}" for c, r in report.columns
    )
    lines.append(header)
    for metric in report.metrics:
        invert = report.polarity.get(metric) == HIGHER_BETTER
        cells = "".join(
            f"{_cell(report.metric_cell('spearman', metric, c, r), invert=invert):>14}"
            for c, r in report.columns
        )
        lines.append(f"  {metric:<17}{cells}")
    lines.append("")
    lines.append(f"Scoring gaps: {len(gaps)}")
    if report.degenerate:
        lines.append(f"Degenerate correlation cells: {len(report.degenerate)}")
    return lines


def write_report(
    report: CorrelationReport,
    aggregates: Sequence[CriterionRow],
    out_dir: str | Path,
    agreement: Mapping[str, object] | None = None,
    gaps: Sequence[ScoreGap] = (),
) -> list[Path]:
    """Write every report file; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, lines: Sequence[str]) -> None:
        path = out / name
        _write(path, lines)
        written.append(path)

    emit("criteria_corr.csv", _criteria_csv(report))
    emit("metric_corr_spearman.csv", _metric_corr_csv(report, "spearman"))
    emit("metric_corr_pearson.csv", _metric_corr_csv(report, "pearson"))
    for aggregation in ("avg", "max"):
        for method in METHODS:
            emit(
                f"metric_matrix_{aggregation}_{method}.csv",
                _metric_matrix_csv(report, aggregation, method),
            )
    emit("aggregates.csv", _aggregates_csv(aggregates))
    emit("report.txt", _summary_text(report, aggregates, agreement, gaps))
    return written


def write_scores_csv(result: ScoreResult, out_dir: str | Path) -> list[Path]:
    """scores.csv plus gaps.csv when any metric was skipped."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["consultation_id,note_id,metric,polarity,reference,value"]
    for row in result.rows:
        lines.append(
            f"{row.consultation_id},{row.note_id},{row.metric},"
            f"{row.polarity},{row.reference},{row.value:.6f}"
        )
    paths = [out / "scores.csv"]
    _write(paths[0], lines)
    if result.gaps:
        gap_lines = ["consultation_id,note_id,metric,reason"]
        for gap in result.gaps:
            reason = gap.reason.replace(",", ";")
            gap_lines.append(
                f"{gap.consultation_id},{gap.note_id},{gap.metric},{reason}"
            )
        paths.append(out / "gaps.csv")
        _write(paths[1], gap_lines)
    return paths
