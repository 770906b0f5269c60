"""Metric registry and the reference/aggregation scoring protocol.

Every judged note is scored against three reference families: the
consulting clinician's note (human), the evaluators' own notes (eval),
and the evaluators' post-edited versions of that note (edited).  Multi
instance families are averaged per family; "avg" is the mean of the
family scores and "max" ranges over individual instances by default.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import ConsultationRecord, NoteVersion, note_length
from .editdist import AlignmentCounts, align_words, levenshtein, mer, wer, wil
from .embedding import (
    SidecarError,
    SidecarStore,
    bertscore,
    embedding_average,
    greedy_matching,
    moverscore,
    rouge_we,
    sentence_cosine,
    vector_extrema,
    wmd,
)
from .facts import MiniOntology, default_ontology, entity_f1, extract_entities
from .lexical import bleu, chrf, meteor, rouge_l, rouge_n
from .text import tokenize

log = logging.getLogger(__name__)

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

REFERENCE_TYPES = ("human", "edited", "eval")
REFERENCE_CHOICES = ("human", "edited", "eval", "avg", "max")
MAX_MODES = ("instance", "type_mean")


@dataclass(frozen=True)
class MetricSpec:
    name: str
    polarity: str
    family: str  # lexical | edit | embedding | concept | baseline
    unit: str  # computation unit shared with sibling metrics
    slot: str | None = None  # sidecar slot, embedding units only
    ref_free: bool = False


METRICS: tuple[MetricSpec, ...] = (
    MetricSpec("ROUGE-1-F1", HIGHER_BETTER, "lexical", "rouge1"),
    MetricSpec("ROUGE-2-F1", HIGHER_BETTER, "lexical", "rouge2"),
    MetricSpec("ROUGE-3-F1", HIGHER_BETTER, "lexical", "rouge3"),
    MetricSpec("ROUGE-4-F1", HIGHER_BETTER, "lexical", "rouge4"),
    MetricSpec("ROUGE-L-Pr", HIGHER_BETTER, "lexical", "rougeL"),
    MetricSpec("ROUGE-L-Re", HIGHER_BETTER, "lexical", "rougeL"),
    MetricSpec("ROUGE-L-F1", HIGHER_BETTER, "lexical", "rougeL"),
    MetricSpec("CHRF", HIGHER_BETTER, "lexical", "chrf"),
    MetricSpec("METEOR", HIGHER_BETTER, "lexical", "meteor"),
    MetricSpec("BLEU", HIGHER_BETTER, "lexical", "bleu"),
    MetricSpec("Levenshtein", LOWER_BETTER, "edit", "levenshtein"),
    MetricSpec("WER", LOWER_BETTER, "edit", "align"),
    MetricSpec("MER", LOWER_BETTER, "edit", "align"),
    MetricSpec("WIL", LOWER_BETTER, "edit", "align"),
    MetricSpec("ROUGE-WE", HIGHER_BETTER, "embedding", "rouge_we", "static_word"),
    MetricSpec(
        "SkipThoughts", HIGHER_BETTER, "embedding", "skipthought",
        "sentence_skipthought",
    ),
    MetricSpec(
        "EmbeddingAverage", HIGHER_BETTER, "embedding", "emb_avg", "static_word"
    ),
    MetricSpec(
        "VectorExtrema", HIGHER_BETTER, "embedding", "vec_ext", "static_word"
    ),
    MetricSpec(
        "GreedyMatching", HIGHER_BETTER, "embedding", "greedy", "static_word"
    ),
    MetricSpec("USE", HIGHER_BETTER, "embedding", "use", "sentence_use"),
    MetricSpec("WMD", LOWER_BETTER, "embedding", "wmd", "static_word"),
    MetricSpec(
        "BertScore", HIGHER_BETTER, "embedding", "bertscore", "contextual_token"
    ),
    MetricSpec(
        "MoverScore", HIGHER_BETTER, "embedding", "moverscore", "contextual_token"
    ),
    MetricSpec("ConceptF1", HIGHER_BETTER, "concept", "concept"),
    MetricSpec("NoteLength", LOWER_BETTER, "baseline", "length", ref_free=True),
)

METRIC_NAMES = tuple(m.name for m in METRICS)
_BY_LOWER = {m.name.lower(): m for m in METRICS}


def metric_spec(name: str) -> MetricSpec:
    spec = _BY_LOWER.get(name.lower())
    if spec is None:
        raise KeyError(f"unknown metric {name!r}; known: {', '.join(METRIC_NAMES)}")
    return spec


def polarity_map() -> dict[str, str]:
    return {m.name: m.polarity for m in METRICS}


@dataclass(frozen=True)
class MetricScoreRow:
    consultation_id: str
    note_id: str
    metric: str
    polarity: str
    reference: str  # human | edited | eval | avg | max
    value: float


@dataclass(frozen=True)
class ScoreGap:
    consultation_id: str
    note_id: str
    metric: str
    reason: str


@dataclass
class ScoreResult:
    rows: list[MetricScoreRow]
    gaps: list[ScoreGap]

    def by_note(self) -> dict[tuple[str, str, str], float]:
        """(note_id, metric, reference) -> value lookup."""
        return {(r.note_id, r.metric, r.reference): r.value for r in self.rows}


class _ScoreContext:
    """Per-run caches shared across all pairs."""

    def __init__(self, store: SidecarStore | None, ontology: MiniOntology | None):
        self.store = store
        self.ontology = ontology
        self._tokens: dict[str, tuple[str, ...]] = {}
        self._entities: dict[str, frozenset[str]] = {}

    def tokens(self, note: NoteVersion) -> tuple[str, ...]:
        got = self._tokens.get(note.note_id)
        if got is None:
            got = tuple(tokenize(note.text))
            self._tokens[note.note_id] = got
        return got

    def entities(self, note: NoteVersion) -> frozenset[str]:
        got = self._entities.get(note.note_id)
        if got is None:
            if self.ontology is None:
                raise ValueError("concept scoring requires an ontology")
            got = frozenset(extract_entities(note.text, self.ontology))
            self._entities[note.note_id] = got
        return got

    def sidecar(self, slot: str, note: NoteVersion):
        if self.store is None:
            raise SidecarError(
                f"embedding sidecar required for note {note.note_id!r} "
                "(no sidecar directory configured)"
            )
        return self.store.load(slot, note.note_id)


def _unit_rouge_n(n: int):
    def compute(ctx: _ScoreContext, hyp: NoteVersion, ref: NoteVersion):
        return {f"ROUGE-{n}-F1": rouge_n(ctx.tokens(hyp), ctx.tokens(ref), n).f1}

    return compute


def _unit_rouge_l(ctx, hyp, ref):
    prf = rouge_l(ctx.tokens(hyp), ctx.tokens(ref))
    return {
        "ROUGE-L-Pr": prf.precision,
        "ROUGE-L-Re": prf.recall,
        "ROUGE-L-F1": prf.f1,
    }


def _unit_align(ctx, hyp, ref):
    counts: AlignmentCounts = align_words(ctx.tokens(hyp), ctx.tokens(ref))
    return {"WER": wer(counts), "MER": mer(counts), "WIL": wil(counts)}


_UNIT_FNS: dict[str, Callable] = {
    "rouge1": _unit_rouge_n(1),
    "rouge2": _unit_rouge_n(2),
    "rouge3": _unit_rouge_n(3),
    "rouge4": _unit_rouge_n(4),
    "rougeL": _unit_rouge_l,
    "chrf": lambda ctx, hyp, ref: {"CHRF": chrf(hyp.text, ref.text)},
    "meteor": lambda ctx, hyp, ref: {
        "METEOR": meteor(ctx.tokens(hyp), ctx.tokens(ref))
    },
    "bleu": lambda ctx, hyp, ref: {"BLEU": bleu(ctx.tokens(hyp), ctx.tokens(ref))},
    "levenshtein": lambda ctx, hyp, ref: {
        "Levenshtein": float(levenshtein(hyp.text, ref.text))
    },
    "align": _unit_align,
    "rouge_we": lambda ctx, hyp, ref: {
        "ROUGE-WE": rouge_we(
            ctx.sidecar("static_word", hyp), ctx.sidecar("static_word", ref)
        ).f1
    },
    "emb_avg": lambda ctx, hyp, ref: {
        "EmbeddingAverage": embedding_average(
            ctx.sidecar("static_word", hyp), ctx.sidecar("static_word", ref)
        )
    },
    "vec_ext": lambda ctx, hyp, ref: {
        "VectorExtrema": vector_extrema(
            ctx.sidecar("static_word", hyp), ctx.sidecar("static_word", ref)
        )
    },
    "greedy": lambda ctx, hyp, ref: {
        "GreedyMatching": greedy_matching(
            ctx.sidecar("static_word", hyp), ctx.sidecar("static_word", ref)
        )
    },
    "wmd": lambda ctx, hyp, ref: {
        "WMD": wmd(
            ctx.sidecar("static_word", hyp), ctx.sidecar("static_word", ref)
        )[0]
    },
    "bertscore": lambda ctx, hyp, ref: {
        "BertScore": bertscore(
            ctx.sidecar("contextual_token", hyp),
            ctx.sidecar("contextual_token", ref),
        ).f1
    },
    "moverscore": lambda ctx, hyp, ref: {
        "MoverScore": moverscore(
            ctx.sidecar("contextual_token", hyp),
            ctx.sidecar("contextual_token", ref),
        )
    },
    "use": lambda ctx, hyp, ref: {
        "USE": sentence_cosine(
            ctx.sidecar("sentence_use", hyp), ctx.sidecar("sentence_use", ref)
        )
    },
    "skipthought": lambda ctx, hyp, ref: {
        "SkipThoughts": sentence_cosine(
            ctx.sidecar("sentence_skipthought", hyp),
            ctx.sidecar("sentence_skipthought", ref),
        )
    },
    "concept": lambda ctx, hyp, ref: {
        "ConceptF1": entity_f1(ctx.entities(hyp), ctx.entities(ref)).f1
    },
}


def _references(
    record: ConsultationRecord, hyp: NoteVersion
) -> dict[str, list[NoteVersion]]:
    return {
        "human": [record.human_note()],
        "edited": [
            n
            for n in record.notes
            if n.role == "edited" and n.parent_note_id == hyp.note_id
        ],
        "eval": record.notes_with_role("eval"),
    }


def resolve_metrics(names: Sequence[str] | None) -> list[MetricSpec]:
    if names is None:
        return list(METRICS)
    return [metric_spec(n) for n in names]


def score_all(
    records: Sequence[ConsultationRecord],
    sidecar_root: str | None = None,
    metrics: Sequence[str] | None = None,
    include_human_hyp: bool = False,
    skip_self_pairs: bool = True,
    max_mode: str = "instance",
    ontology: MiniOntology | None = None,
) -> ScoreResult:
    """Score every judged note against the reference protocol."""
    if max_mode not in MAX_MODES:
        raise ValueError(f"unknown max mode {max_mode!r}")
    specs = resolve_metrics(metrics)
    store = SidecarStore(sidecar_root) if sidecar_root else None
    needs_concepts = any(s.family == "concept" for s in specs)
    ctx = _ScoreContext(
        store,
        ontology if ontology is not None else (
            default_ontology() if needs_concepts else None
        ),
    )

    # unit name -> metric names requested from it
    unit_wants: dict[str, list[str]] = {}
    for spec in specs:
        if spec.ref_free:
            continue
        unit_wants.setdefault(spec.unit, []).append(spec.name)
    want_length = any(s.unit == "length" for s in specs)
    unit_slots = {s.unit: s.slot for s in specs if s.slot}

    rows: list[MetricScoreRow] = []
    gaps: list[ScoreGap] = []
    for rec in records:
        for hyp in rec.notes:
            if hyp.role not in ("human", "generated"):
                continue
            if hyp.role == "human" and not include_human_hyp:
                continue
            refs = _references(rec, hyp)
            active_units = dict(unit_wants)
            # Embedding units need every sidecar of the pair family up front;
            # a missing one drops the whole metric for this note.
            for unit, slot in unit_slots.items():
                if unit not in active_units:
                    continue
                try:
                    ctx.sidecar(slot, hyp)
                    for group in refs.values():
                        for ref in group:
                            ctx.sidecar(slot, ref)
                except SidecarError as exc:
                    for name in active_units.pop(unit):
                        gaps.append(
                            ScoreGap(rec.consultation_id, hyp.note_id, name, str(exc))
                        )

            # metric -> reference type -> per-instance values
            instance_scores: dict[str, dict[str, list[float]]] = {}
            for ref_type in REFERENCE_TYPES:
                for ref in refs[ref_type]:
                    if skip_self_pairs and ref.text == hyp.text:
                        continue
                    for unit, wanted in active_units.items():
                        values = _UNIT_FNS[unit](ctx, hyp, ref)
                        for name in wanted:
                            instance_scores.setdefault(name, {}).setdefault(
                                ref_type, []
                            ).append(values[name])

            for name, per_type in instance_scores.items():
                spec = metric_spec(name)
                type_means = {
                    t: sum(vals) / len(vals) for t, vals in per_type.items()
                }
                for ref_type, mean_value in type_means.items():
                    rows.append(
                        MetricScoreRow(
                            rec.consultation_id, hyp.note_id, name,
                            spec.polarity, ref_type, mean_value,
                        )
                    )
                avg = sum(type_means.values()) / len(type_means)
                if max_mode == "instance":
                    peak = max(v for vals in per_type.values() for v in vals)
                else:
                    peak = max(type_means.values())
                rows.append(
                    MetricScoreRow(
                        rec.consultation_id, hyp.note_id, name,
                        spec.polarity, "avg", avg,
                    )
                )
                rows.append(
                    MetricScoreRow(
                        rec.consultation_id, hyp.note_id, name,
                        spec.polarity, "max", peak,
                    )
                )

            if want_length:
                value = float(note_length(hyp.text))
                for choice in REFERENCE_CHOICES:
                    rows.append(
                        MetricScoreRow(
                            rec.consultation_id, hyp.note_id, "NoteLength",
                            LOWER_BETTER, choice, value,
                        )
                    )
    if gaps:
        log.warning("scoring recorded %d gaps", len(gaps))
    return ScoreResult(rows=rows, gaps=gaps)
