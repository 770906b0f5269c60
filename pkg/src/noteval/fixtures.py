"""Synthetic fixture corpora with planted judgements.

Fixtures exist so that agreement and correlation code can be tested
against analytically known values: every evaluator marks the same spans
and the same counts, and post-edit times share one rank order, so all
agreement coefficients equal 1.0 exactly and aggregate tables can be
written down by hand.

Planted shape per consultation (judged slot s = 0 is the human note,
s = 1..4 the generated notes):

    incorrect count = s     omission count = s + 1
    post_edit_seconds(evaluator e, slot s) = 60 * (e + 1) + 30 * s
"""

from __future__ import annotations

import random

from .corpus import ConsultationRecord, ErrorSpan, JudgementRecord, NoteVersion, Turn

EVALUATORS = ("eval1", "eval2", "eval3", "eval4", "eval5")

_COMPLAINTS = (
    "diarrhoea", "a persistent headache", "lower back pain", "a dry cough",
    "abdominal cramps", "dizziness", "an itchy rash", "chest tightness",
)
_DURATIONS = ("2 days", "3 days", "5 days", "a week", "two weeks")
_OPENERS = (
    "Symptoms came on gradually.",
    "Symptoms started suddenly.",
    "Episodes are intermittent.",
    "Getting slightly worse each day.",
)
_NEGATIVES = (
    "No fever.", "No blood in stool.", "No night sweats.",
    "No shortness of breath.", "No recent travel.", "No weight loss.",
    "Not on any regular medication.", "No known allergies.",
)
_HISTORY = (
    "Past medical history unremarkable.",
    "Mother has type 2 diabetes.",
    "Appendicectomy in 2015.",
    "Non-smoker.",
    "Alcohol within recommended limits.",
)
_PLANS = (
    "Plan: safety netting advised.",
    "Plan: bloods arranged.",
    "Plan: review in one week.",
    "Plan: stool sample requested.",
    "Plan: trial of simple analgesia.",
)
_HALLUCINATIONS = (
    "Reports visiting A and E yesterday.",
    "Wife and children also unwell.",
    "Works as a delivery driver.",
    "Recently returned from abroad.",
    "Takes ibuprofen daily.",
    "Father has a history of migraines.",
)
_TAGS_BY_SLOT = (
    frozenset({"good-behaviour"}),
    frozenset({"hallucination"}),
    frozenset({"repetition", "incorrect-order"}),
    frozenset({"omission-generic"}),
    frozenset({"hallucination", "omission-of-negative"}),
)


def planted_time(evaluator_index: int, slot: int) -> float:
    return 60.0 * (evaluator_index + 1) + 30.0 * slot


def _human_lines(rng: random.Random) -> list[str]:
    complaint = rng.choice(_COMPLAINTS)
    lines = [f"Presenting with {complaint} for {rng.choice(_DURATIONS)}."]
    lines.append(rng.choice(_OPENERS))
    lines.extend(rng.sample(_NEGATIVES, 3))
    lines.extend(rng.sample(_HISTORY, 2))
    lines.append(rng.choice(_PLANS))
    return lines


def _one_consultation(cid: str, rng: random.Random) -> ConsultationRecord:
    human_lines = _human_lines(rng)
    complaint_line = human_lines[0]

    transcript = (
        Turn("clinician", "What seems to be the problem today?"),
        Turn("patient", complaint_line.replace("Presenting with", "I have had")),
        Turn("clinician", "Any fever or anything else going on?"),
        Turn("patient", "No, nothing else that I have noticed."),
        Turn("clinician", "Let me write that up and we will talk through a plan."),
    )

    notes: list[NoteVersion] = [
        NoteVersion(
            note_id=f"{cid}-human",
            role="human",
            source_id="consulting-clinician",
            text="\n".join(human_lines),
        )
    ]

    # Judged slots: 0 = human note, 1..4 = generated notes. The generated
    # note for slot s drops s+1 human lines and gains s fabricated ones.
    dropped_by_slot: dict[int, list[str]] = {
        0: ["Patient denies any other symptoms."]
    }
    inserted_by_slot: dict[int, list[str]] = {0: []}
    for s in range(1, 5):
        drop_idx = sorted(rng.sample(range(1, len(human_lines)), s + 1))
        dropped = [human_lines[i] for i in drop_idx]
        kept = [l for i, l in enumerate(human_lines) if i not in drop_idx]
        inserted = rng.sample(_HALLUCINATIONS, s)
        gen_lines = list(kept)
        for line in inserted:
            gen_lines.insert(rng.randrange(1, len(gen_lines) + 1), line)
        dropped_by_slot[s] = dropped
        inserted_by_slot[s] = inserted
        notes.append(
            NoteVersion(
                note_id=f"{cid}-gen{s}",
                role="generated",
                source_id=f"model-{s}",
                text="\n".join(gen_lines),
            )
        )

    for evaluator in EVALUATORS:
        eval_lines = list(human_lines)
        eval_lines.insert(
            rng.randrange(1, len(eval_lines) + 1),
            f"Reviewed against the recording by {evaluator}.",
        )
        notes.append(
            NoteVersion(
                note_id=f"{cid}-eval-{evaluator}",
                role="eval",
                source_id=evaluator,
                text="\n".join(eval_lines),
            )
        )

    # Edited versions exist for the generated notes only: the incorrect
    # lines come out, the omitted lines go back in.
    for s in range(1, 5):
        gen_note = notes[s]
        for evaluator in EVALUATORS:
            edited_lines = [
                l
                for l in gen_note.text.split("\n")
                if l not in inserted_by_slot[s]
            ]
            edited_lines.extend(dropped_by_slot[s])
            edited_lines.append(f"Checked and signed off by {evaluator}.")
            notes.append(
                NoteVersion(
                    note_id=f"{cid}-edit-gen{s}-{evaluator}",
                    role="edited",
                    source_id=evaluator,
                    parent_note_id=gen_note.note_id,
                    text="\n".join(edited_lines),
                )
            )

    judged_ids = [f"{cid}-human"] + [f"{cid}-gen{s}" for s in range(1, 5)]
    judgements: list[JudgementRecord] = []
    for s, note_id in enumerate(judged_ids):
        incorrect = tuple(
            ErrorSpan(text, "incorrect", critical=(s >= 3 and i == 0))
            for i, text in enumerate(inserted_by_slot[s])
        )
        omission = tuple(
            ErrorSpan(text, "omission") for text in dropped_by_slot[s]
        )
        for e, evaluator in enumerate(EVALUATORS):
            judgements.append(
                JudgementRecord(
                    evaluator_id=evaluator,
                    note_id=note_id,
                    post_edit_seconds=planted_time(e, s),
                    incorrect_spans=incorrect,
                    omission_spans=omission,
                    comments=f"planted fixture judgement for slot {s}",
                    taxonomy_tags=_TAGS_BY_SLOT[s],
                )
            )

    return ConsultationRecord(
        consultation_id=cid,
        transcript=transcript,
        notes=tuple(notes),
        judgements=tuple(judgements),
    )


def gen_fixtures(n_consultations: int, seed: int) -> list[ConsultationRecord]:
    """Deterministic fixture corpus: 30 notes and 25 judgements each."""
    if n_consultations < 1:
        raise ValueError("n_consultations must be >= 1")
    rng = random.Random(seed)
    return [
        _one_consultation(f"fix{i:03d}", rng) for i in range(n_consultations)
    ]
