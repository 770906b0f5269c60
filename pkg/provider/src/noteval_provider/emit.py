"""Sidecar emission: corpus in, one sidecar file per (note, slot) out.

All backends are resolved before the first write, so a model that fails
to load exits without leaving partial output behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .backends import load_backends
from .corpus import iter_notes
from .sidecars import SLOT_KINDS, atomic_write_text, render_sidecar, slots_for_kinds, write_manifest

# Notes with these roles define document frequencies for the idf section.
REFERENCE_ROLES = ("human", "eval", "edited")

DEFAULT_MODELS = {
    "static_word": "bert-base-uncased",
    "contextual_token": "bert-base-uncased",
    "sentence": "bert-base-uncased",
}

KINDS = ("static_word", "contextual_token", "sentence")


@dataclass(frozen=True)
class ProviderConfig:
    corpus_root: Path
    out_root: Path
    kinds: tuple[str, ...] = KINDS
    models: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_MODELS))
    stub: bool = False
    # tokenizer-compatibility mode: contextual units follow the shared
    # core token rules instead of the model's own subword pieces
    core_tokens: bool = True


def corpus_idf(
    reference_texts: Iterable[str], tokens: Callable[[str], Sequence[str]]
) -> dict[str, float]:
    """idf(t) = ln((1+N)/(1+df)) over reference notes, '' holds the df=0 value."""
    df: dict[str, int] = {}
    n_docs = 0
    for text in reference_texts:
        n_docs += 1
        for token in set(tokens(text)):
            df[token] = df.get(token, 0) + 1
    idf = {
        token: math.log((1 + n_docs) / (1 + count)) for token, count in df.items()
    }
    idf[""] = math.log(1 + n_docs)
    return idf


def emit_sidecars(config: ProviderConfig) -> int:
    """Write sidecars for every note; returns the number of files written."""
    notes = list(iter_notes(config.corpus_root))
    slots = slots_for_kinds(config.kinds)
    if not notes or not slots:
        return 0
    backends = load_backends(
        list(config.kinds), dict(config.models), config.stub, config.core_tokens
    )

    idf = None
    if "contextual_token" in slots:
        ctx = backends["contextual_token"]
        idf = corpus_idf(
            (n.text for n in notes if n.role in REFERENCE_ROLES), ctx.units
        )

    out = Path(config.out_root)
    for slot in slots:
        (out / slot).mkdir(parents=True, exist_ok=True)

    written = 0
    for note in notes:
        for slot in slots:
            kind = SLOT_KINDS[slot]
            backend = backends[kind]
            own_idf = None
            if kind == "static_word":
                units, vectors = backend.static(note.text)
            elif kind == "contextual_token":
                units, vectors = backend.contextual(note.text)
                unseen = idf[""]
                own_idf = {u: idf.get(u, unseen) for u in set(units)}
            else:
                units, vectors = backend.sentence(note.text, slot)
            content = render_sidecar(
                kind, backend.dimensions[kind], units, vectors, own_idf
            )
            atomic_write_text(out / slot / f"{note.note_id}.tsv", content)
            written += 1

    models = {kind: backends[kind].model_id for kind in config.kinds}
    write_manifest(out, models, written)
    return written
