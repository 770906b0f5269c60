"""Hash-derived stub embeddings: pure functions of the text.

The checked-in sidecars under tests/data/fixture_sidecars pin the hash
scheme: regeneration must reproduce them byte for byte, so any change to
tokenization, hashing, or formatting shows up as a diff here.
"""

import hashlib
import math
from pathlib import Path

import numpy as np
import pytest

from noteval.corpus import ConsultationRecord, NoteVersion
from noteval.embedding import SLOTS, read_sidecar
from noteval.stubembed import (
    BOUNDARY,
    CONTEXT_DIM,
    NEIGHBOR_WEIGHT,
    SENTENCE_DIM,
    STATIC_DIM,
    contextual_sidecar,
    corpus_idf,
    hash_vector,
    sentence_sidecar,
    static_sidecar,
    write_stub_sidecars,
)

DATA_DIR = Path(__file__).parent / "data" / "fixture_sidecars"


def reference_hash_vector(key, dim):
    """Independent re-derivation of the digest-to-float mapping."""
    values = []
    block = 0
    while len(values) < dim:
        digest = hashlib.sha256(f"{key}#{block}".encode()).digest()
        for i in range(0, len(digest), 2):
            values.append(int.from_bytes(digest[i : i + 2], "little"))
        block += 1
    return np.array(values[:dim], dtype=np.float64) / 32768.0 - 1.0


class TestHashVector:
    def test_matches_reference_derivation(self):
        for key in ("word:cough", "ctx:fever", "use:Plan made.", ""):
            for dim in (1, 16, 24, 40):
                assert np.array_equal(
                    hash_vector(key, dim), reference_hash_vector(key, dim)
                )

    def test_deterministic(self):
        assert np.array_equal(hash_vector("k", 24), hash_vector("k", 24))

    def test_range(self):
        v = hash_vector("range-check", 64)
        assert v.min() >= -1.0
        assert v.max() < 1.0

    def test_keys_differ(self):
        assert not np.array_equal(hash_vector("a", 24), hash_vector("b", 24))

    def test_prefix_stability_across_dims(self):
        assert np.array_equal(hash_vector("p", 24)[:16], hash_vector("p", 16))

    def test_cached_array_is_read_only(self):
        v = hash_vector("frozen", 8)
        with pytest.raises(ValueError):
            v[0] = 0.0


class TestStaticSidecar:
    def test_unique_tokens_first_occurrence_order(self):
        side = static_sidecar("n1", "Cough worse at night, cough dry.")
        assert side.kind == "static_word"
        assert side.dimension == STATIC_DIM
        assert side.units == ("cough", "worse", "at", "night", "dry")
        assert np.array_equal(side.vectors[0], hash_vector("word:cough", STATIC_DIM))
        assert np.array_equal(side.vectors[4], hash_vector("word:dry", STATIC_DIM))

    def test_empty_text(self):
        side = static_sidecar("n1", "")
        assert side.units == ()
        assert side.vectors.shape == (0, STATIC_DIM)

    def test_same_text_same_vectors(self):
        a = static_sidecar("a", "fever and chills")
        b = static_sidecar("b", "fever and chills")
        assert np.array_equal(a.vectors, b.vectors)


class TestContextualSidecar:
    def test_one_row_per_occurrence(self):
        side = contextual_sidecar("n1", "no fever no chills")
        assert side.kind == "contextual_token"
        assert side.units == ("no", "fever", "no", "chills")
        assert side.vectors.shape == (4, CONTEXT_DIM)

    def test_neighbour_blend(self):
        side = contextual_sidecar("n1", "a b c")
        expected_mid = (
            hash_vector("ctx:b", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector("left:a", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector("right:c", CONTEXT_DIM)
        )
        assert np.allclose(side.vectors[1], expected_mid)

    def test_boundary_token(self):
        side = contextual_sidecar("n1", "a b c")
        expected_first = (
            hash_vector("ctx:a", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector(f"left:{BOUNDARY}", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector("right:b", CONTEXT_DIM)
        )
        assert np.allclose(side.vectors[0], expected_first)

    def test_same_token_differs_by_context(self):
        side = contextual_sidecar("n1", "no fever no chills")
        assert not np.allclose(side.vectors[0], side.vectors[2])

    def test_idf_restricted_to_own_tokens(self):
        side = contextual_sidecar(
            "n1", "b a", idf={"a": 1.0, "b": 2.0, "zzz": 9.0}
        )
        assert side.idf == {"a": 1.0, "b": 2.0}

    def test_no_idf_by_default(self):
        assert contextual_sidecar("n1", "a b").idf is None


class TestSentenceSidecar:
    def test_pooled_mean_of_sentence_hashes(self):
        text = "First line here.\nSecond line there."
        side = sentence_sidecar("n1", text, "sentence_use")
        expected = np.mean(
            [
                hash_vector("use:First line here.", SENTENCE_DIM),
                hash_vector("use:Second line there.", SENTENCE_DIM),
            ],
            axis=0,
        )
        assert side.kind == "sentence"
        assert side.units == ("note",)
        assert np.allclose(side.vectors[0], expected)

    def test_single_sentence_equals_its_hash(self):
        side = sentence_sidecar("n1", "Only one line.", "sentence_skipthought")
        assert np.allclose(
            side.vectors[0], hash_vector("skip:Only one line.", SENTENCE_DIM)
        )

    def test_slots_differ(self):
        a = sentence_sidecar("n1", "Same text.", "sentence_use")
        b = sentence_sidecar("n1", "Same text.", "sentence_skipthought")
        assert not np.allclose(a.vectors, b.vectors)

    def test_unknown_slot(self):
        with pytest.raises(ValueError, match="unknown sentence slot"):
            sentence_sidecar("n1", "Text.", "sentence_other")


def tiny_records():
    return [
        ConsultationRecord(
            consultation_id="c1",
            transcript=(),
            notes=(
                NoteVersion("n-h", "human", "clin", "cough and fever"),
                NoteVersion("n-g", "generated", "m", "cough plus zebra"),
                NoteVersion("n-e", "eval", "e1", "cough only"),
            ),
            judgements=(),
        )
    ]


class TestCorpusIdf:
    def test_reference_roles_only(self):
        idf = corpus_idf(tiny_records())
        # Two reference notes (human, eval); "cough" in both, "fever" in one.
        assert idf["cough"] == pytest.approx(math.log(3.0 / 3.0))
        assert idf["fever"] == pytest.approx(math.log(3.0 / 2.0))
        assert "zebra" not in idf
        assert idf[""] == pytest.approx(math.log(3.0))


class TestWriteStubSidecars:
    def test_writes_every_note_and_slot(self, tmp_path):
        count = write_stub_sidecars(tiny_records(), tmp_path)
        assert count == 3 * len(SLOTS)
        for slot in SLOTS:
            for note_id in ("n-h", "n-g", "n-e"):
                assert (tmp_path / slot / f"{note_id}.tsv").exists()

    def test_round_trip_matches_memory(self, tmp_path):
        write_stub_sidecars(tiny_records(), tmp_path)
        loaded = read_sidecar(tmp_path / "static_word" / "n-h.tsv")
        direct = static_sidecar("n-h", "cough and fever")
        assert loaded.units == direct.units
        assert np.allclose(loaded.vectors, direct.vectors, atol=1e-5)

    def test_unseen_token_gets_fallback_idf(self, tmp_path):
        write_stub_sidecars(tiny_records(), tmp_path)
        side = read_sidecar(tmp_path / "contextual_token" / "n-g.tsv")
        # "zebra" never appears in a reference-role note.
        assert side.idf["zebra"] == pytest.approx(math.log(3.0), abs=1e-7)
        assert side.idf["cough"] == pytest.approx(0.0, abs=1e-7)

    def test_slot_subset(self, tmp_path):
        count = write_stub_sidecars(tiny_records(), tmp_path, slots=["sentence_use"])
        assert count == 3
        assert not (tmp_path / "static_word").exists()

    def test_unknown_slot_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown sidecar slot"):
            write_stub_sidecars(tiny_records(), tmp_path, slots=["glove"])

    def test_regeneration_is_byte_identical(self, tmp_path):
        write_stub_sidecars(tiny_records(), tmp_path / "a")
        write_stub_sidecars(tiny_records(), tmp_path / "b")
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.tsv"))
        assert files_a
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


class TestCheckedInSidecars:
    def test_fixture_sidecars_match_checked_in_bytes(self, fixture_sidecar_dir):
        pinned = sorted(p.relative_to(DATA_DIR) for p in DATA_DIR.rglob("*.tsv"))
        fresh = sorted(
            p.relative_to(fixture_sidecar_dir)
            for p in Path(fixture_sidecar_dir).rglob("*.tsv")
        )
        assert pinned == fresh
        assert len(pinned) == 240  # 2 consultations x 30 notes x 4 slots
        for rel in pinned:
            assert (DATA_DIR / rel).read_bytes() == (
                fixture_sidecar_dir / rel
            ).read_bytes(), f"sidecar drifted: {rel}"
