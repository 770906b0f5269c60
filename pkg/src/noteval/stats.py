"""Agreement and correlation statistics for the human judgement study.

Krippendorff's alpha is computed from the coincidence matrix over pairable
values, with interval and ordinal difference functions.  Correlations carry
two-sided p-values from the t approximation.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import t as _student_t

from .corpus import ConsultationRecord, ErrorSpan, note_length

log = logging.getLogger(__name__)

LEVELS = ("interval", "ordinal")
RANKINGS = ("consultation", "global")
SPAN_KINDS = ("incorrect", "omission")

# Roles whose notes receive judgements; eval/edited notes are reference
# material only.
JUDGED_ROLES = ("human", "generated")


class StatsError(ValueError):
    """Raised for degenerate agreement or correlation inputs."""


@dataclass(frozen=True)
class ReliabilityMatrix:
    """Units x raters grid of optional values for one agreement question."""

    raters: tuple[str, ...]
    units: tuple[str, ...]
    values: tuple[tuple[float | None, ...], ...]  # one row per unit
    level: str = "interval"

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise StatsError(f"unknown level {self.level!r}")
        if len(self.values) != len(self.units):
            raise StatsError("one value row required per unit")
        for unit, row in zip(self.units, self.values):
            if len(row) != len(self.raters):
                raise StatsError(f"unit {unit!r}: one slot required per rater")
            for v in row:
                if v is not None and not math.isfinite(v):
                    raise StatsError(f"unit {unit!r}: non-finite value {v!r}")

    @classmethod
    def from_records(
        cls,
        records: Mapping[str, Mapping[str, float]],
        level: str = "interval",
        raters: Sequence[str] | None = None,
    ) -> "ReliabilityMatrix":
        """Build from a unit -> rater -> value mapping; absent cells stay None."""
        units = tuple(records)
        if raters is None:
            seen: list[str] = []
            for row in records.values():
                for r in row:
                    if r not in seen:
                        seen.append(r)
            rater_ids = tuple(seen)
        else:
            rater_ids = tuple(raters)
        values = tuple(
            tuple(records[u].get(r) for r in rater_ids) for u in units
        )
        return cls(raters=rater_ids, units=units, values=values, level=level)

    def restrict(self, raters: Sequence[str]) -> "ReliabilityMatrix":
        """Sub-matrix keeping only the named rater columns."""
        idx = [self.raters.index(r) for r in raters]
        rows = tuple(tuple(row[i] for i in idx) for row in self.values)
        return ReliabilityMatrix(
            raters=tuple(raters), units=self.units, values=rows, level=self.level
        )


def _coincidences(matrix: ReliabilityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Value domain plus coincidence counts over units with >= 2 values."""
    rows = [[v for v in row if v is not None] for row in matrix.values]
    rows = [r for r in rows if len(r) >= 2]
    domain = sorted({v for r in rows for v in r})
    index = {v: i for i, v in enumerate(domain)}
    coin = np.zeros((len(domain), len(domain)))
    for r in rows:
        w = 1.0 / (len(r) - 1)
        for i, a in enumerate(r):
            for j, b in enumerate(r):
                if i != j:
                    coin[index[a], index[b]] += w
    return np.asarray(domain, dtype=float), coin


def _difference_matrix(
    domain: np.ndarray, marginals: np.ndarray, level: str
) -> np.ndarray:
    if level == "interval":
        return (domain[:, None] - domain[None, :]) ** 2
    # Ordinal: squared distance between cumulative-marginal midpoints,
    # (sum of n_g for g between the two values, minus half of each endpoint).
    cum = np.cumsum(marginals)
    size = len(domain)
    delta = np.zeros((size, size))
    for c in range(size):
        for k in range(c + 1, size):
            between = cum[k] - (cum[c - 1] if c else 0.0)
            half_ends = (marginals[c] + marginals[k]) / 2.0
            delta[c, k] = delta[k, c] = (between - half_ends) ** 2
    return delta


def krippendorff_alpha(matrix: ReliabilityMatrix) -> float:
    """Alpha = 1 - observed/expected disagreement on pairable values."""
    domain, coin = _coincidences(matrix)
    if len(domain) == 0:
        raise StatsError("degenerate matrix: no unit carries two or more values")
    marginals = coin.sum(axis=1)
    total = marginals.sum()
    delta = _difference_matrix(domain, marginals, matrix.level)
    upper = np.triu_indices(len(domain), k=1)
    observed = float((coin[upper] * delta[upper]).sum())
    expected = float((np.outer(marginals, marginals)[upper] * delta[upper]).sum())
    if expected == 0.0:
        if observed == 0.0:
            return 1.0
        raise StatsError("degenerate matrix: zero expected disagreement")
    return 1.0 - (total - 1.0) * observed / expected


def pairwise_alpha(
    matrix: ReliabilityMatrix,
) -> dict[tuple[str, str], float]:
    """Alpha for every unordered rater pair, each on its own sub-matrix."""
    out: dict[tuple[str, str], float] = {}
    for i, a in enumerate(matrix.raters):
        for b in matrix.raters[i + 1 :]:
            try:
                out[(a, b)] = krippendorff_alpha(matrix.restrict([a, b]))
            except StatsError as exc:
                log.warning("rater pair (%s, %s) skipped: %s", a, b, exc)
    return out


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ascending ranks; ties share the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2.0 + 1.0
        for pos in order[i : j + 1]:
            ranks[pos] = shared
        i = j + 1
    return ranks


def times_to_ranks(times: Sequence[float]) -> list[float]:
    """Rank post-edit times ascending (fastest note gets rank 1)."""
    return average_ranks(times)


def span_overlap_f1(
    spans_a: Sequence[ErrorSpan], spans_b: Sequence[ErrorSpan]
) -> float:
    """Token-multiset F1 between two evaluators' span lists for one note."""
    from .text import tokenize

    bag_a = Counter(t for s in spans_a for t in tokenize(s.text))
    bag_b = Counter(t for s in spans_b for t in tokenize(s.text))
    if not bag_a and not bag_b:
        return 1.0
    overlap = sum((bag_a & bag_b).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(bag_a.values())
    recall = overlap / sum(bag_b.values())
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int
    method: str

    def significant(self, threshold: float = 0.05) -> bool:
        return self.p_value < threshold


def _validated_xy(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(list(x), dtype=float)
    ys = np.asarray(list(y), dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise StatsError("correlation needs two equal-length vectors")
    if len(xs) < 3:
        raise StatsError("correlation needs at least 3 observations")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise StatsError("correlation inputs must be finite")
    return xs, ys


def _two_sided_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t_stat = abs(r) * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * _student_t.sf(t_stat, df=n - 2))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation with a two-sided t-test p-value."""
    xs, ys = _validated_xy(x, y)
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    ssx = float(xc @ xc)
    ssy = float(yc @ yc)
    if ssx == 0.0 or ssy == 0.0:
        raise StatsError("undefined correlation: zero variance input")
    r = float(xc @ yc) / math.sqrt(ssx * ssy)
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(r, _two_sided_p(r, len(xs)), len(xs), "pearson")


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson correlation of average ranks."""
    xs, ys = _validated_xy(x, y)
    base = pearson(average_ranks(xs.tolist()), average_ranks(ys.tolist()))
    return CorrelationResult(base.coefficient, base.p_value, base.n, "spearman")


def _unit_key(consultation_id: str, note_id: str) -> str:
    return f"{consultation_id}/{note_id}"


def time_rank_matrix(
    records: Sequence[ConsultationRecord], ranking: str = "consultation"
) -> ReliabilityMatrix:
    """Ordinal reliability matrix of post-edit-time ranks.

    ranking="consultation": each evaluator's times over the judged notes of
    one consultation are ranked 1..5 and every note slot is a unit; an
    evaluator missing any slot is dropped for that consultation.
    ranking="global": one ranking per evaluator over all their judgements.
    """
    if ranking not in RANKINGS:
        raise StatsError(f"unknown ranking mode {ranking!r}")
    raters = sorted({j.evaluator_id for rec in records for j in rec.judgements})
    cells: dict[str, dict[str, float]] = {}
    if ranking == "consultation":
        for rec in records:
            note_ids = [n.note_id for n in rec.notes if n.role in JUDGED_ROLES]
            per_eval: dict[str, dict[str, float]] = {}
            for j in rec.judgements:
                per_eval.setdefault(j.evaluator_id, {})[j.note_id] = (
                    j.post_edit_seconds
                )
            for unit_note in note_ids:
                cells.setdefault(_unit_key(rec.consultation_id, unit_note), {})
            for evaluator in raters:
                times = per_eval.get(evaluator, {})
                if set(times) < set(note_ids):
                    if times:
                        log.warning(
                            "%s: %s judged %d/%d notes; ranking dropped",
                            rec.consultation_id,
                            evaluator,
                            len(times),
                            len(note_ids),
                        )
                    continue
                ranks = times_to_ranks([times[nid] for nid in note_ids])
                for nid, rank in zip(note_ids, ranks):
                    cells[_unit_key(rec.consultation_id, nid)][evaluator] = rank
    else:
        per_eval_units: dict[str, list[tuple[str, float]]] = {}
        for rec in records:
            for j in rec.judgements:
                unit = _unit_key(rec.consultation_id, j.note_id)
                cells.setdefault(unit, {})
                per_eval_units.setdefault(j.evaluator_id, []).append(
                    (unit, j.post_edit_seconds)
                )
        for evaluator, pairs in per_eval_units.items():
            ranks = times_to_ranks([t for _, t in pairs])
            for (unit, _), rank in zip(pairs, ranks):
                cells[unit][evaluator] = rank
    return ReliabilityMatrix.from_records(cells, level="ordinal", raters=raters)


def count_matrix(
    records: Sequence[ConsultationRecord], kind: str = "incorrect"
) -> ReliabilityMatrix:
    """Interval reliability matrix of per-note error-span counts."""
    if kind not in SPAN_KINDS:
        raise StatsError(f"unknown span kind {kind!r}")
    raters = sorted({j.evaluator_id for rec in records for j in rec.judgements})
    cells: dict[str, dict[str, float]] = {}
    for rec in records:
        for j in rec.judgements:
            spans = j.incorrect_spans if kind == "incorrect" else j.omission_spans
            unit = _unit_key(rec.consultation_id, j.note_id)
            cells.setdefault(unit, {})[j.evaluator_id] = float(len(spans))
    return ReliabilityMatrix.from_records(cells, level="interval", raters=raters)


def _pair_overlap_scores(
    records: Sequence[ConsultationRecord], kind: str
) -> dict[tuple[str, str], list[float]]:
    if kind not in SPAN_KINDS:
        raise StatsError(f"unknown span kind {kind!r}")
    scores: dict[tuple[str, str], list[float]] = {}
    for rec in records:
        for note_id in rec.judged_note_ids():
            by_eval = {j.evaluator_id: j for j in rec.judgements_for(note_id)}
            evaluators = sorted(by_eval)
            for i, a in enumerate(evaluators):
                for b in evaluators[i + 1 :]:
                    ja, jb = by_eval[a], by_eval[b]
                    spans_a = (
                        ja.incorrect_spans if kind == "incorrect" else ja.omission_spans
                    )
                    spans_b = (
                        jb.incorrect_spans if kind == "incorrect" else jb.omission_spans
                    )
                    scores.setdefault((a, b), []).append(
                        span_overlap_f1(spans_a, spans_b)
                    )
    return scores


def span_agreement_mean(
    records: Sequence[ConsultationRecord], kind: str = "incorrect"
) -> float:
    """Grand mean of span_overlap_f1 over all evaluator pairs and notes."""
    scores = _pair_overlap_scores(records, kind)
    flat = [s for pair_scores in scores.values() for s in pair_scores]
    if not flat:
        raise StatsError("no evaluator pair judged a common note")
    return sum(flat) / len(flat)


def pairwise_span_agreement(
    records: Sequence[ConsultationRecord], kind: str = "incorrect"
) -> dict[tuple[str, str], float]:
    """Per-evaluator-pair mean of span_overlap_f1 over shared notes."""
    scores = _pair_overlap_scores(records, kind)
    return {pair: sum(vals) / len(vals) for pair, vals in sorted(scores.items())}


@dataclass(frozen=True)
class JudgementRow:
    """One evaluator's criteria for one note."""

    consultation_id: str
    note_id: str
    role: str
    evaluator_id: str
    time: float
    incorrect: int
    omission: int
    length: int

    @property
    def combined(self) -> int:
        return self.incorrect + self.omission


@dataclass(frozen=True)
class CriterionRow:
    """Per-note criteria averaged over evaluators."""

    consultation_id: str
    note_id: str
    role: str
    time: float
    incorrect: float
    omission: float
    combined: float
    length: int
    n_judgements: int


def judgement_rows(records: Sequence[ConsultationRecord]) -> list[JudgementRow]:
    """One row per (note, evaluator) judgement, with note role and length."""
    rows: list[JudgementRow] = []
    for rec in records:
        lengths = {n.note_id: note_length(n.text) for n in rec.notes}
        roles = {n.note_id: n.role for n in rec.notes}
        for j in rec.judgements:
            rows.append(
                JudgementRow(
                    consultation_id=rec.consultation_id,
                    note_id=j.note_id,
                    role=roles[j.note_id],
                    evaluator_id=j.evaluator_id,
                    time=j.post_edit_seconds,
                    incorrect=len(j.incorrect_spans),
                    omission=len(j.omission_spans),
                    length=lengths[j.note_id],
                )
            )
    return rows


def aggregate_judgements(
    records: Sequence[ConsultationRecord],
) -> list[CriterionRow]:
    """Per-note means of time and span counts over the judging evaluators."""
    rows: list[CriterionRow] = []
    for rec in records:
        for note in rec.notes:
            if note.role not in JUDGED_ROLES:
                continue
            judgements = rec.judgements_for(note.note_id)
            if not judgements:
                log.warning(
                    "%s/%s has no judgements; excluded from aggregation",
                    rec.consultation_id,
                    note.note_id,
                )
                continue
            count = len(judgements)
            mean_inc = sum(len(j.incorrect_spans) for j in judgements) / count
            mean_omi = sum(len(j.omission_spans) for j in judgements) / count
            rows.append(
                CriterionRow(
                    consultation_id=rec.consultation_id,
                    note_id=note.note_id,
                    role=note.role,
                    time=sum(j.post_edit_seconds for j in judgements) / count,
                    incorrect=mean_inc,
                    omission=mean_omi,
                    combined=mean_inc + mean_omi,
                    length=note_length(note.text),
                    n_judgements=count,
                )
            )
    return rows


def group_means(rows: Sequence[CriterionRow]) -> dict[str, dict[str, float]]:
    """Mean criteria per role group (human vs generated notes)."""
    out: dict[str, dict[str, float]] = {}
    for role in JUDGED_ROLES:
        group = [r for r in rows if r.role == role]
        if not group:
            continue
        size = len(group)
        out[role] = {
            "time": sum(r.time for r in group) / size,
            "incorrect": sum(r.incorrect for r in group) / size,
            "omission": sum(r.omission for r in group) / size,
            "combined": sum(r.combined for r in group) / size,
            "length": sum(r.length for r in group) / size,
            "notes": float(size),
        }
    return out


def agreement_summary(
    records: Sequence[ConsultationRecord], ranking: str = "consultation"
) -> dict[str, object]:
    """Headline agreement numbers plus all evaluator-pair breakdowns."""
    time_matrix = time_rank_matrix(records, ranking=ranking)
    incorrect_matrix = count_matrix(records, "incorrect")
    omission_matrix = count_matrix(records, "omission")
    return {
        "ranking": ranking,
        "time_alpha": krippendorff_alpha(time_matrix),
        "incorrect_alpha": krippendorff_alpha(incorrect_matrix),
        "omission_alpha": krippendorff_alpha(omission_matrix),
        "incorrect_overlap": span_agreement_mean(records, "incorrect"),
        "omission_overlap": span_agreement_mean(records, "omission"),
        "pairwise": {
            "time_alpha": pairwise_alpha(time_matrix),
            "incorrect_alpha": pairwise_alpha(incorrect_matrix),
            "omission_alpha": pairwise_alpha(omission_matrix),
            "incorrect_overlap": pairwise_span_agreement(records, "incorrect"),
            "omission_overlap": pairwise_span_agreement(records, "omission"),
        },
    }
