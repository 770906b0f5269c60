"""Concept-set metric: map note spans to ontology entities, score set F1.

A dictionary of primary-care concepts (see data/mini_ontology.tsv) stands
in for a full clinical NER stack: candidate spans are sliding 1-5 token
windows inside each sentence unit, matched to entity names by character
trigram similarity. The metric value itself is plain set F1 over the
extracted entity ids.
"""

from __future__ import annotations

import weakref
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .lexical import PRF
from .text import sentence_segments, tokenize

ACCEPT_THRESHOLD = 0.85
MAX_WINDOW = 5


class OntologyError(ValueError):
    """Ontology file malformed."""


@dataclass(frozen=True, eq=False)
class MiniOntology:
    # entity_id -> (canonical name, synonyms)
    entries: dict[str, tuple[str, tuple[str, ...]]]

    def names(self, entity_id: str) -> list[str]:
        canonical, synonyms = self.entries[entity_id]
        return [canonical, *synonyms]


@dataclass(frozen=True)
class EntityMention:
    span_text: str
    entity_id: str
    score: float


def load_ontology(path: str | Path) -> MiniOntology:
    """Parse `entity_id\\tcanonical\\tsyn1|syn2|...` lines."""
    entries: dict[str, tuple[str, tuple[str, ...]]] = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), 1
    ):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise OntologyError(f"{path}:{lineno}: expected at least 2 columns")
        entity_id = parts[0].strip()
        canonical = parts[1].strip()
        raw_syns = parts[2].split("|") if len(parts) > 2 and parts[2] else []
        synonyms = tuple(s.strip() for s in raw_syns)
        if not entity_id or not canonical:
            raise OntologyError(f"{path}:{lineno}: empty id or canonical name")
        if entity_id in entries:
            raise OntologyError(f"{path}:{lineno}: duplicate id {entity_id!r}")
        if any(not s for s in synonyms):
            raise OntologyError(f"{path}:{lineno}: empty synonym")
        entries[entity_id] = (canonical, synonyms)
    if not entries:
        raise OntologyError(f"{path}: no entries")
    return MiniOntology(entries)


def default_ontology() -> MiniOntology:
    ref = resources.files("noteval").joinpath("data/mini_ontology.tsv")
    with resources.as_file(ref) as path:
        return load_ontology(path)


def _normalize(phrase: str) -> str:
    return " ".join(tokenize(phrase))


def trigram_counts(phrase: str) -> Counter:
    text = _normalize(phrase)
    if len(text) < 3:
        return Counter({text: 1}) if text else Counter()
    return Counter(text[i : i + 3] for i in range(len(text) - 2))


def trigram_similarity(a: str, b: str) -> float:
    """Overlap coefficient on character-trigram multisets:
    |A n B| / min(|A|, |B|)."""
    ca = trigram_counts(a)
    cb = trigram_counts(b)
    if not ca or not cb:
        return 0.0
    overlap = sum((ca & cb).values())
    return overlap / min(sum(ca.values()), sum(cb.values()))


class _NameIndex:
    """Inverted trigram index so candidates only score names they share
    at least one trigram with."""

    def __init__(self, onto: MiniOntology):
        self.names: list[tuple[str, Counter, int]] = []  # (entity_id, counts, size)
        self.by_trigram: dict[str, list[int]] = {}
        for entity_id in onto.entries:
            for name in onto.names(entity_id):
                counts = trigram_counts(name)
                if not counts:
                    continue
                k = len(self.names)
                self.names.append((entity_id, counts, sum(counts.values())))
                for tri in counts:
                    self.by_trigram.setdefault(tri, []).append(k)

    def best_match(self, candidate: str) -> tuple[str, float] | None:
        cand_counts = trigram_counts(candidate)
        if not cand_counts:
            return None
        cand_size = sum(cand_counts.values())
        overlaps: dict[int, int] = {}
        for tri, cand_n in cand_counts.items():
            for k in self.by_trigram.get(tri, ()):
                overlaps[k] = overlaps.get(k, 0) + min(
                    cand_n, self.names[k][1][tri]
                )
        best: tuple[str, float] | None = None
        for k, overlap in sorted(overlaps.items()):
            entity_id, _, name_size = self.names[k]
            score = overlap / min(cand_size, name_size)
            if best is None or score > best[1]:
                best = (entity_id, score)
        return best


_INDEX_CACHE: "weakref.WeakKeyDictionary[MiniOntology, _NameIndex]" = (
    weakref.WeakKeyDictionary()
)


def _index_for(onto: MiniOntology) -> _NameIndex:
    index = _INDEX_CACHE.get(onto)
    if index is None:
        index = _NameIndex(onto)
        _INDEX_CACHE[onto] = index
    return _INDEX_CACHE[onto]


def extract_mentions(text: str, onto: MiniOntology) -> list[EntityMention]:
    """Accepted entity mentions, longest-match-first within each sentence.

    Windows never cross sentence-unit boundaries, so appending a sentence
    cannot disturb what earlier sentences yield.
    """
    if not onto.entries:
        raise OntologyError("ontology is empty")
    index = _index_for(onto)
    mentions: list[EntityMention] = []
    score_cache: dict[str, tuple[str, float] | None] = {}
    for segment in sentence_segments(text):
        tokens = tokenize(segment)
        claimed: set[int] = set()
        for width in range(min(MAX_WINDOW, len(tokens)), 0, -1):
            for start in range(0, len(tokens) - width + 1):
                span = range(start, start + width)
                if any(pos in claimed for pos in span):
                    continue
                candidate = " ".join(tokens[start : start + width])
                if candidate not in score_cache:
                    score_cache[candidate] = index.best_match(candidate)
                match = score_cache[candidate]
                if match is None or match[1] < ACCEPT_THRESHOLD:
                    continue
                claimed.update(span)
                mentions.append(EntityMention(candidate, match[0], match[1]))
    return mentions


def extract_entities(text: str, onto: MiniOntology) -> set[str]:
    return {m.entity_id for m in extract_mentions(text, onto)}


def entity_f1(hyp_entities: set[str], ref_entities: set[str]) -> PRF:
    """Set precision/recall/F1; two empty sets count as perfect agreement."""
    if not hyp_entities and not ref_entities:
        return PRF(1.0, 1.0, 1.0)
    if not hyp_entities or not ref_entities:
        return PRF(0.0, 0.0, 0.0)
    common = len(hyp_entities & ref_entities)
    return PRF.from_pr(common / len(hyp_entities), common / len(ref_entities))
