"""Deterministic hash-derived embeddings for running the pipeline offline.

Every vector is a pure function of the token or sentence string (sha256
of a salted key, mapped to floats in [-1, 1)), so independently written
generators produce byte-identical sidecars for identical text.  Static
vectors depend on the token alone; contextual vectors mix in the left
and right neighbour; sentence vectors are the mean over sentence hashes.
"""

from __future__ import annotations

import hashlib
import logging
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import ConsultationRecord
from .embedding import SLOTS, EmbeddingSidecar, compute_idf, write_sidecar
from .text import sentence_segments, tokenize

log = logging.getLogger(__name__)

STATIC_DIM = 24
CONTEXT_DIM = 24
SENTENCE_DIM = 16
NEIGHBOR_WEIGHT = 0.3
BOUNDARY = "\x00"

# Roles whose notes define document frequencies for the idf section.
REFERENCE_ROLES = ("human", "eval", "edited")

_VECTOR_CACHE: dict[tuple[str, int], np.ndarray] = {}


def hash_vector(key: str, dim: int) -> np.ndarray:
    """dim floats in [-1, 1) from sha256 of "<key>#<block>" digests."""
    cached = _VECTOR_CACHE.get((key, dim))
    if cached is not None:
        return cached
    out = np.empty(dim, dtype=np.float64)
    filled = 0
    block = 0
    while filled < dim:
        digest = hashlib.sha256(f"{key}#{block}".encode("utf-8")).digest()
        words = np.frombuffer(digest, dtype="<u2")
        take = min(dim - filled, len(words))
        out[filled : filled + take] = words[:take].astype(np.float64)
        filled += take
        block += 1
    out = out / 32768.0 - 1.0
    out.setflags(write=False)
    _VECTOR_CACHE[(key, dim)] = out
    return out


def static_sidecar(note_id: str, text: str) -> EmbeddingSidecar:
    """One vector per distinct token, in first-occurrence order."""
    seen: list[str] = []
    for token in tokenize(text):
        if token not in seen:
            seen.append(token)
    vectors = (
        np.vstack([hash_vector(f"word:{t}", STATIC_DIM) for t in seen])
        if seen
        else np.empty((0, STATIC_DIM))
    )
    return EmbeddingSidecar(
        note_id=note_id,
        kind="static_word",
        dimension=STATIC_DIM,
        units=tuple(seen),
        vectors=vectors,
    )


def contextual_sidecar(
    note_id: str, text: str, idf: Mapping[str, float] | None = None
) -> EmbeddingSidecar:
    """One vector per token occurrence, blended with both neighbours."""
    tokens = tokenize(text)
    rows = np.empty((len(tokens), CONTEXT_DIM))
    for i, token in enumerate(tokens):
        left = tokens[i - 1] if i > 0 else BOUNDARY
        right = tokens[i + 1] if i + 1 < len(tokens) else BOUNDARY
        rows[i] = (
            hash_vector(f"ctx:{token}", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector(f"left:{left}", CONTEXT_DIM)
            + NEIGHBOR_WEIGHT * hash_vector(f"right:{right}", CONTEXT_DIM)
        )
    own_idf = (
        {t: idf[t] for t in sorted(set(tokens)) if t in idf}
        if idf is not None
        else None
    )
    return EmbeddingSidecar(
        note_id=note_id,
        kind="contextual_token",
        dimension=CONTEXT_DIM,
        units=tuple(tokens),
        vectors=rows,
        idf=own_idf,
    )


def sentence_sidecar(note_id: str, text: str, slot: str) -> EmbeddingSidecar:
    """Single pooled entry: mean of per-sentence hash vectors."""
    prefixes = {"sentence_use": "use", "sentence_skipthought": "skip"}
    if slot not in prefixes:
        raise ValueError(f"unknown sentence slot {slot!r}")
    segments = sentence_segments(text) or [text]
    pooled = np.mean(
        [hash_vector(f"{prefixes[slot]}:{s}", SENTENCE_DIM) for s in segments],
        axis=0,
    )
    return EmbeddingSidecar(
        note_id=note_id,
        kind="sentence",
        dimension=SENTENCE_DIM,
        units=("note",),
        vectors=pooled.reshape(1, SENTENCE_DIM),
    )


def corpus_idf(records: Sequence[ConsultationRecord]) -> dict[str, float]:
    """idf over reference-role notes, with the unseen-token value under ''."""
    token_lists = [
        tokenize(n.text)
        for rec in records
        for n in rec.notes
        if n.role in REFERENCE_ROLES
    ]
    idf = compute_idf(token_lists)
    idf[""] = math.log(1 + len(token_lists))  # df = 0 fallback
    return idf


def write_stub_sidecars(
    records: Sequence[ConsultationRecord],
    out_root: str | Path,
    slots: Sequence[str] = SLOTS,
) -> int:
    """Write sidecars for every note in the corpus; returns the file count."""
    for slot in slots:
        if slot not in SLOTS:
            raise ValueError(f"unknown sidecar slot {slot!r}")
    root = Path(out_root)
    idf = corpus_idf(records)
    unseen = idf[""]
    written = 0
    for slot in slots:
        (root / slot).mkdir(parents=True, exist_ok=True)
    for rec in records:
        for note in rec.notes:
            for slot in slots:
                if slot == "static_word":
                    sidecar = static_sidecar(note.note_id, note.text)
                elif slot == "contextual_token":
                    tokens = set(tokenize(note.text))
                    own = {t: idf.get(t, unseen) for t in tokens}
                    sidecar = contextual_sidecar(note.note_id, note.text, own)
                else:
                    sidecar = sentence_sidecar(note.note_id, note.text, slot)
                write_sidecar(root / slot / f"{note.note_id}.tsv", sidecar)
                written += 1
    log.info("wrote %d stub sidecars under %s", written, root)
    return written
