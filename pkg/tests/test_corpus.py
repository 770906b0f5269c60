"""Corpus layout, validation, and lossless round trips."""

import json

import pytest

from noteval.corpus import (
    ConsultationRecord,
    CorpusError,
    ErrorSpan,
    JudgementRecord,
    NoteVersion,
    Turn,
    load_corpus,
    note_length,
    save_corpus,
)


def build_record(cid="c001"):
    return ConsultationRecord(
        consultation_id=cid,
        transcript=(
            Turn("clinician", "What brings you in today?"),
            Turn("patient", "I have had a cough for two weeks."),
        ),
        notes=(
            NoteVersion(
                "n-h", "human", "clinician", "Cough for two weeks.\nChest clear."
            ),
            NoteVersion(
                "n-g",
                "generated",
                "model-a",
                "Patient reports cough.\nLungs clear on exam.",
                extras={"decode": "beam"},
            ),
            NoteVersion("n-e", "eval", "ev1", "Two week cough, clear chest."),
            NoteVersion(
                "n-ed", "edited", "ev1", "Cough two weeks.", parent_note_id="n-g"
            ),
        ),
        judgements=(
            JudgementRecord(
                evaluator_id="ev1",
                note_id="n-g",
                post_edit_seconds=84.5,
                incorrect_spans=(
                    ErrorSpan("on exam", "incorrect", critical=True),
                ),
                omission_spans=(
                    ErrorSpan("two weeks", "omission", extras={"offset": 3}),
                ),
                comments="missing duration",
                taxonomy_tags=frozenset({"omission-generic", "hallucination"}),
                extras={"session": 2},
            ),
            JudgementRecord("ev2", "n-h", 30.0),
        ),
    )


class TestRoundTrip:
    def test_hand_built_record(self, tmp_path):
        record = build_record()
        save_corpus([record], tmp_path)
        loaded = load_corpus(tmp_path)
        assert loaded == [record]

    def test_fixture_corpus(self, fixture_records, tmp_path):
        save_corpus(fixture_records, tmp_path)
        assert load_corpus(tmp_path) == fixture_records

    def test_extras_survive_on_disk(self, tmp_path):
        record = build_record()
        save_corpus([record], tmp_path)
        notes_lines = (tmp_path / "c001" / "notes.jsonl").read_text().splitlines()
        gen_doc = json.loads(notes_lines[1])
        assert gen_doc["decode"] == "beam"
        judgement_doc = json.loads(
            (tmp_path / "c001" / "judgements.jsonl").read_text().splitlines()[0]
        )
        assert judgement_doc["session"] == 2
        assert judgement_doc["omission_spans"][0]["offset"] == 3
        assert judgement_doc["taxonomy_tags"] == ["hallucination", "omission-generic"]

    def test_save_is_deterministic(self, tmp_path):
        record = build_record()
        save_corpus([record], tmp_path / "a")
        save_corpus([record], tmp_path / "b")
        for name in ("transcript.txt", "notes.jsonl", "judgements.jsonl"):
            assert (tmp_path / "a" / "c001" / name).read_bytes() == (
                tmp_path / "b" / "c001" / name
            ).read_bytes()

    def test_judgements_file_optional(self, tmp_path):
        record = ConsultationRecord(
            consultation_id="c1",
            transcript=(),
            notes=(NoteVersion("n1", "human", "clinician", "Some note."),),
            judgements=(),
        )
        save_corpus([record], tmp_path)
        (tmp_path / "c1" / "judgements.jsonl").unlink()
        (tmp_path / "c1" / "transcript.txt").unlink()
        loaded = load_corpus(tmp_path)
        assert loaded[0].judgements == ()
        assert loaded[0].transcript == ()


def write_raw(tmp_path, notes, judgements=None, transcript=None):
    cdir = tmp_path / "c001"
    cdir.mkdir()
    (cdir / "notes.jsonl").write_text(
        "".join(json.dumps(n) + "\n" for n in notes), encoding="utf-8"
    )
    if judgements is not None:
        (cdir / "judgements.jsonl").write_text(
            "".join(json.dumps(j) + "\n" for j in judgements), encoding="utf-8"
        )
    if transcript is not None:
        (cdir / "transcript.txt").write_text(transcript, encoding="utf-8")
    return tmp_path


HUMAN = {"note_id": "n1", "role": "human", "source_id": "clin", "text": "A note."}


class TestValidation:
    def test_missing_notes_file(self, tmp_path):
        (tmp_path / "c001").mkdir()
        with pytest.raises(CorpusError, match="missing notes.jsonl"):
            load_corpus(tmp_path)

    def test_requires_exactly_one_human_note(self, tmp_path):
        write_raw(tmp_path, [dict(HUMAN, role="generated")])
        with pytest.raises(CorpusError, match="exactly one human note"):
            load_corpus(tmp_path)

    def test_rejects_two_human_notes(self, tmp_path):
        write_raw(tmp_path, [HUMAN, dict(HUMAN, note_id="n2")])
        with pytest.raises(CorpusError, match="exactly one human note"):
            load_corpus(tmp_path)

    def test_duplicate_note_id(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN, dict(HUMAN, role="generated", source_id="m")],
        )
        with pytest.raises(CorpusError, match="duplicate note_id"):
            load_corpus(tmp_path)

    def test_unknown_role(self, tmp_path):
        write_raw(tmp_path, [HUMAN, dict(HUMAN, note_id="n2", role="draft")])
        with pytest.raises(CorpusError, match="unknown role"):
            load_corpus(tmp_path)

    def test_empty_note_text(self, tmp_path):
        write_raw(tmp_path, [dict(HUMAN, text="   ")])
        with pytest.raises(CorpusError, match="empty"):
            load_corpus(tmp_path)

    def test_edited_note_needs_parent(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN, {"note_id": "n2", "role": "edited", "source_id": "e", "text": "X."}],
        )
        with pytest.raises(CorpusError, match="no\\s+parent_note_id"):
            load_corpus(tmp_path)

    def test_edited_note_orphan_parent(self, tmp_path):
        write_raw(
            tmp_path,
            [
                HUMAN,
                {
                    "note_id": "n2",
                    "role": "edited",
                    "source_id": "e",
                    "text": "X.",
                    "parent_note_id": "ghost",
                },
            ],
        )
        with pytest.raises(CorpusError, match="orphan"):
            load_corpus(tmp_path)

    def test_eval_note_needs_source(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN, {"note_id": "n2", "role": "eval", "source_id": "", "text": "X."}],
        )
        with pytest.raises(CorpusError, match="no\\s+evaluator source_id"):
            load_corpus(tmp_path)

    def test_judgement_unknown_note(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            judgements=[
                {"evaluator_id": "e1", "note_id": "ghost", "post_edit_seconds": 5}
            ],
        )
        with pytest.raises(CorpusError, match="unknown note"):
            load_corpus(tmp_path)

    def test_judgement_negative_time(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            judgements=[
                {"evaluator_id": "e1", "note_id": "n1", "post_edit_seconds": -1}
            ],
        )
        with pytest.raises(CorpusError, match="post_edit_seconds"):
            load_corpus(tmp_path)

    def test_judgement_missing_evaluator(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            judgements=[{"note_id": "n1", "post_edit_seconds": 5}],
        )
        with pytest.raises(CorpusError, match="missing evaluator_id"):
            load_corpus(tmp_path)

    def test_empty_span_text(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            judgements=[
                {
                    "evaluator_id": "e1",
                    "note_id": "n1",
                    "post_edit_seconds": 5,
                    "incorrect_spans": [{"text": "  ", "kind": "incorrect"}],
                }
            ],
        )
        with pytest.raises(CorpusError, match="empty error-span text"):
            load_corpus(tmp_path)

    def test_span_kind_must_match_list(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            judgements=[
                {
                    "evaluator_id": "e1",
                    "note_id": "n1",
                    "post_edit_seconds": 5,
                    "omission_spans": [{"text": "x", "kind": "incorrect"}],
                }
            ],
        )
        with pytest.raises(CorpusError, match="span kind"):
            load_corpus(tmp_path)

    def test_unknown_taxonomy_tag(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            judgements=[
                {
                    "evaluator_id": "e1",
                    "note_id": "n1",
                    "post_edit_seconds": 5,
                    "taxonomy_tags": ["made-up-tag"],
                }
            ],
        )
        with pytest.raises(CorpusError, match="unknown taxonomy tags"):
            load_corpus(tmp_path)

    def test_transcript_speaker_prefix_required(self, tmp_path):
        write_raw(tmp_path, [HUMAN], transcript="NARRATOR: hello\n")
        with pytest.raises(CorpusError, match="no speaker prefix"):
            load_corpus(tmp_path)

    def test_transcript_blank_lines_skipped(self, tmp_path):
        write_raw(
            tmp_path,
            [HUMAN],
            transcript="CLINICIAN: Hello.\n\nPATIENT: Hi there.\n",
        )
        record = load_corpus(tmp_path)[0]
        assert record.transcript == (
            Turn("clinician", "Hello."),
            Turn("patient", "Hi there."),
        )

    def test_invalid_json_line(self, tmp_path):
        cdir = tmp_path / "c001"
        cdir.mkdir()
        (cdir / "notes.jsonl").write_text("{not json\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="invalid json"):
            load_corpus(tmp_path)

    def test_non_object_json_line(self, tmp_path):
        cdir = tmp_path / "c001"
        cdir.mkdir()
        (cdir / "notes.jsonl").write_text("[1, 2]\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="expected an object"):
            load_corpus(tmp_path)

    def test_root_must_be_directory(self, tmp_path):
        with pytest.raises(CorpusError, match="not a directory"):
            load_corpus(tmp_path / "missing")

    def test_empty_root(self, tmp_path):
        with pytest.raises(CorpusError, match="no consultations"):
            load_corpus(tmp_path)


class TestRecordHelpers:
    def test_lookups(self):
        record = build_record()
        assert record.note("n-g").role == "generated"
        with pytest.raises(KeyError):
            record.note("ghost")
        assert record.human_note().note_id == "n-h"
        assert [n.note_id for n in record.notes_with_role("edited")] == ["n-ed"]
        assert [j.evaluator_id for j in record.judgements_for("n-g")] == ["ev1"]
        assert record.judged_note_ids() == ["n-g", "n-h"]

    def test_note_length_counts_sentences(self):
        assert note_length("One sentence here.") == 1
        assert note_length("First line.\nSecond line.\nThird.") == 3
        assert note_length("Severe cough noted. Plan made.") == 2
