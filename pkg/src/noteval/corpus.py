"""Corpus data model, on-disk layout, ingestion and validation.

A corpus is a directory with one subdirectory per consultation:

    <root>/<consultation_id>/transcript.txt    speaker-prefixed lines
    <root>/<consultation_id>/notes.jsonl       one note version per line
    <root>/<consultation_id>/judgements.jsonl  one judgement per line

All files are UTF-8. Unknown fields on jsonl records are kept in an
`extras` mapping and written back on save, so third-party corpora round
trip without loss. Records are immutable after load and safe to share
across workers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from .text import sentence_count

log = logging.getLogger(__name__)

ROLES = ("human", "generated", "eval", "edited")
SPEAKERS = ("clinician", "patient")

# Qualitative-feedback label set; judgements may carry any subset.
TAXONOMY_TAGS = frozenset({
    "contradiction",
    "contradiction-not-reported",
    "symptom-as-fact",
    "misleading",
    "hallucination",
    "incorrect-statement",
    "nonsensical",
    "repetition",
    "incorrect-order",
    "non-standard-acronym",
    "omission-generic",
    "omission-of-negative",
    "good-behaviour",
})


class CorpusError(ValueError):
    """On-disk data violates the corpus contract."""


def note_length(text: str) -> int:
    """Note length in sentences (the baseline 'metric')."""
    return sentence_count(text)


@dataclass(frozen=True)
class Turn:
    speaker: str  # clinician | patient
    text: str


@dataclass(frozen=True)
class ErrorSpan:
    text: str
    kind: str  # incorrect | omission
    critical: bool = False
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        doc = {"text": self.text, "kind": self.kind, "critical": self.critical}
        doc.update(self.extras)
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any], kind: str) -> "ErrorSpan":
        doc = dict(doc)
        text = doc.pop("text", "")
        span_kind = doc.pop("kind", kind)
        critical = bool(doc.pop("critical", False))
        return cls(text=text, kind=span_kind, critical=critical, extras=doc)


@dataclass(frozen=True)
class NoteVersion:
    note_id: str
    role: str  # human | generated | eval | edited
    source_id: str  # model id, consulting-clinician marker, or evaluator id
    text: str
    parent_note_id: str | None = None
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "note_id": self.note_id,
            "role": self.role,
            "source_id": self.source_id,
            "text": self.text,
        }
        if self.parent_note_id is not None:
            doc["parent_note_id"] = self.parent_note_id
        doc.update(self.extras)
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "NoteVersion":
        doc = dict(doc)
        return cls(
            note_id=doc.pop("note_id", ""),
            role=doc.pop("role", ""),
            source_id=doc.pop("source_id", ""),
            text=doc.pop("text", ""),
            parent_note_id=doc.pop("parent_note_id", None),
            extras=doc,
        )


@dataclass(frozen=True)
class JudgementRecord:
    evaluator_id: str
    note_id: str
    post_edit_seconds: float
    incorrect_spans: tuple[ErrorSpan, ...] = ()
    omission_spans: tuple[ErrorSpan, ...] = ()
    comments: str = ""
    taxonomy_tags: frozenset[str] = frozenset()
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "evaluator_id": self.evaluator_id,
            "note_id": self.note_id,
            "post_edit_seconds": self.post_edit_seconds,
            "incorrect_spans": [s.to_json() for s in self.incorrect_spans],
            "omission_spans": [s.to_json() for s in self.omission_spans],
            "comments": self.comments,
            "taxonomy_tags": sorted(self.taxonomy_tags),
        }
        doc.update(self.extras)
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "JudgementRecord":
        doc = dict(doc)
        return cls(
            evaluator_id=doc.pop("evaluator_id", ""),
            note_id=doc.pop("note_id", ""),
            post_edit_seconds=float(doc.pop("post_edit_seconds", -1.0)),
            incorrect_spans=tuple(
                ErrorSpan.from_json(s, "incorrect")
                for s in doc.pop("incorrect_spans", [])
            ),
            omission_spans=tuple(
                ErrorSpan.from_json(s, "omission")
                for s in doc.pop("omission_spans", [])
            ),
            comments=str(doc.pop("comments", "")),
            taxonomy_tags=frozenset(doc.pop("taxonomy_tags", [])),
            extras=doc,
        )


@dataclass(frozen=True)
class ConsultationRecord:
    consultation_id: str
    transcript: tuple[Turn, ...]
    notes: tuple[NoteVersion, ...]
    judgements: tuple[JudgementRecord, ...]

    def note(self, note_id: str) -> NoteVersion:
        for n in self.notes:
            if n.note_id == note_id:
                return n
        raise KeyError(note_id)

    def human_note(self) -> NoteVersion:
        return next(n for n in self.notes if n.role == "human")

    def notes_with_role(self, role: str) -> list[NoteVersion]:
        return [n for n in self.notes if n.role == role]

    def judgements_for(self, note_id: str) -> list[JudgementRecord]:
        return [j for j in self.judgements if j.note_id == note_id]

    def judged_note_ids(self) -> list[str]:
        seen: list[str] = []
        for j in self.judgements:
            if j.note_id not in seen:
                seen.append(j.note_id)
        return seen


def validate_judgement(
    judgement: JudgementRecord, note_ids: set[str], where: str
) -> None:
    """Schema checks shared by the loader and the task server."""
    if not judgement.evaluator_id:
        raise CorpusError(f"{where}: judgement missing evaluator_id")
    if judgement.note_id not in note_ids:
        raise CorpusError(
            f"{where}: judgement references unknown note {judgement.note_id!r}"
        )
    if not judgement.post_edit_seconds >= 0:
        raise CorpusError(
            f"{where}: post_edit_seconds must be >= 0, "
            f"got {judgement.post_edit_seconds!r}"
        )
    for span in judgement.incorrect_spans + judgement.omission_spans:
        if not span.text.strip():
            raise CorpusError(f"{where}: empty error-span text")
    for spans, kind in (
        (judgement.incorrect_spans, "incorrect"),
        (judgement.omission_spans, "omission"),
    ):
        for span in spans:
            if span.kind != kind:
                raise CorpusError(
                    f"{where}: span kind {span.kind!r} in the {kind} list"
                )
    unknown = judgement.taxonomy_tags - TAXONOMY_TAGS
    if unknown:
        raise CorpusError(f"{where}: unknown taxonomy tags {sorted(unknown)}")


def _validate_record(record: ConsultationRecord) -> None:
    cid = record.consultation_id
    humans = [n for n in record.notes if n.role == "human"]
    if len(humans) != 1:
        raise CorpusError(
            f"consultation {cid!r}: expected exactly one human note, "
            f"found {len(humans)}"
        )
    note_ids = {n.note_id for n in record.notes}
    if len(note_ids) != len(record.notes):
        raise CorpusError(f"consultation {cid!r}: duplicate note_id")
    for n in record.notes:
        if n.role not in ROLES:
            raise CorpusError(
                f"consultation {cid!r}: note {n.note_id!r} has unknown "
                f"role {n.role!r}"
            )
        if not n.text.strip():
            raise CorpusError(f"consultation {cid!r}: note {n.note_id!r} empty")
        if n.role == "edited":
            if not n.parent_note_id:
                raise CorpusError(
                    f"consultation {cid!r}: edited note {n.note_id!r} has no "
                    f"parent_note_id"
                )
            if n.parent_note_id not in note_ids:
                raise CorpusError(
                    f"consultation {cid!r}: edited note {n.note_id!r} is an "
                    f"orphan (parent {n.parent_note_id!r} not found)"
                )
        if n.role == "eval" and not n.source_id:
            raise CorpusError(
                f"consultation {cid!r}: eval note {n.note_id!r} has no "
                f"evaluator source_id"
            )
    for turn in record.transcript:
        if turn.speaker not in SPEAKERS:
            raise CorpusError(
                f"consultation {cid!r}: unknown speaker {turn.speaker!r}"
            )
    for j in record.judgements:
        validate_judgement(j, note_ids, f"consultation {cid!r}")


def _parse_transcript(path: Path) -> tuple[Turn, ...]:
    turns: list[Turn] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        for speaker in SPEAKERS:
            prefix = speaker.upper() + ":"
            if line.startswith(prefix):
                turns.append(Turn(speaker, line[len(prefix):].strip()))
                break
        else:
            raise CorpusError(f"{path}:{lineno}: line has no speaker prefix")
    return tuple(turns)


def _parse_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid json ({exc.msg})") from exc
        if not isinstance(doc, dict):
            raise CorpusError(f"{path}:{lineno}: expected an object")
        yield lineno, doc


def load_consultation(cdir: Path) -> ConsultationRecord:
    transcript_path = cdir / "transcript.txt"
    notes_path = cdir / "notes.jsonl"
    judgements_path = cdir / "judgements.jsonl"
    if not notes_path.exists():
        raise CorpusError(f"{cdir}: missing notes.jsonl")
    transcript = (
        _parse_transcript(transcript_path) if transcript_path.exists() else ()
    )
    notes = tuple(NoteVersion.from_json(doc) for _, doc in _parse_jsonl(notes_path))
    judgements: tuple[JudgementRecord, ...] = ()
    if judgements_path.exists():
        judgements = tuple(
            JudgementRecord.from_json(doc)
            for _, doc in _parse_jsonl(judgements_path)
        )
    record = ConsultationRecord(
        consultation_id=cdir.name,
        transcript=transcript,
        notes=notes,
        judgements=judgements,
    )
    _validate_record(record)
    return record


def load_corpus(root_path: str | Path) -> list[ConsultationRecord]:
    """Load and validate every consultation under `root_path`."""
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a directory")
    cdirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not cdirs:
        raise CorpusError(f"no consultations found under {root}")
    records = [load_consultation(cdir) for cdir in cdirs]
    n_notes = sum(len(r.notes) for r in records)
    n_judgements = sum(len(r.judgements) for r in records)
    judged = sum(len(r.judged_note_ids()) for r in records)
    log.info(
        "loaded %d consultations: %d notes, %d judged notes, %d judgements",
        len(records), n_notes, judged, n_judgements,
    )
    return records


def _dump_jsonl(path: Path, docs: list[dict[str, Any]]) -> None:
    lines = [json.dumps(doc, ensure_ascii=False) for doc in docs]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def save_corpus(records: list[ConsultationRecord], root_path: str | Path) -> None:
    """Write `records` in the corpus layout. Deterministic for fixed input."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    for record in records:
        cdir = root / record.consultation_id
        cdir.mkdir(parents=True, exist_ok=True)
        transcript_lines = [
            f"{t.speaker.upper()}: {t.text}" for t in record.transcript
        ]
        (cdir / "transcript.txt").write_text(
            "".join(line + "\n" for line in transcript_lines), encoding="utf-8"
        )
        _dump_jsonl(cdir / "notes.jsonl", [n.to_json() for n in record.notes])
        _dump_jsonl(
            cdir / "judgements.jsonl", [j.to_json() for j in record.judgements]
        )
